"""Named constructions of the usual textbook channels"""
from __future__ import annotations

from collections import namedtuple
from typing import Any, Callable, Sequence

import numpy as np

from channel_models.channel import Channel, validate_channel
from channel_models.errors import BadParameter

ChannelKind = namedtuple("ChannelKind", ("builder", "parameters"))


def _probability(name: str, value: Any) -> float:
    try:
        prob = float(value)
    except (TypeError, ValueError) as err:
        raise BadParameter(f"{name} must be a number, got {value!r}") from err
    if not 0.0 <= prob <= 1.0:
        raise BadParameter(f"{name} must lie in [0, 1], got {prob}")
    return prob


def _alphabet(name: str, value: Any, minimum: int) -> int:
    try:
        size = int(value)
    except (TypeError, ValueError) as err:
        raise BadParameter(f"{name} must be an integer, got {value!r}") from err
    if isinstance(value, bool) or size != value or size < minimum:
        raise BadParameter(f"{name} must be an integer >= {minimum}, got {value!r}")
    return size


def _bsc(delta: Any) -> Channel:
    flip = _probability("delta", delta)
    return validate_channel([[1 - flip, flip], [flip, 1 - flip]])


def _bec(erasure: Any) -> Channel:
    prob = _probability("erasure", erasure)
    return validate_channel(
        [[1 - prob, prob, 0.0], [0.0, prob, 1 - prob]], output_labels=["0", "e", "1"]
    )


def _zchannel(flip: Any) -> Channel:
    prob = _probability("flip", flip)
    return validate_channel([[1.0, 0.0], [prob, 1 - prob]])


def _typewriter(size: Any, stay: Any) -> Channel:
    k = _alphabet("k", size, 2)
    prob = _probability("stay", stay)
    matrix = np.zeros((k, k))
    for x in range(k):
        matrix[x, x] += prob
        matrix[x, (x + 1) % k] += 1 - prob
    return validate_channel(matrix)


def _useless(output: Sequence[Any], inputs: Any = 2) -> Channel:
    q = [_probability("q", value) for value in output]
    if not q or abs(sum(q) - 1.0) > 1e-12:
        raise BadParameter(f"q must be a distribution, got {list(output)}")
    size = _alphabet("inputs", inputs, 1)
    return validate_channel([q] * size)


def _noiseless(size: Any) -> Channel:
    k = _alphabet("k", size, 1)
    return validate_channel(np.eye(k))


def define_channels() -> dict[str, ChannelKind]:
    """Define all of the standard channels that can be requested by name

    ChannelKind is a named tuple
    builder: function returning the Channel
    parameters: names of the positional parameters the builder takes

    bsc(delta): binary symmetric, crossover delta
    bec(erasure): binary erasure, outputs (0, e, 1)
    zchannel(flip): 0 is noiseless, 1 turns into 0 with probability flip
    typewriter(k, stay): x goes to x with probability stay and to x+1 mod k otherwise
    useless(q, inputs=2): every row equals q
    noiseless(k): identity on k symbols

    Returns:
        dict[str, ChannelKind]: available constructions
    """
    kinds = {
        "bsc": ChannelKind(builder=_bsc, parameters=("delta",)),
        "bec": ChannelKind(builder=_bec, parameters=("erasure",)),
        "zchannel": ChannelKind(builder=_zchannel, parameters=("flip",)),
        "typewriter": ChannelKind(builder=_typewriter, parameters=("k", "stay")),
        "useless": ChannelKind(builder=_useless, parameters=("q", "inputs")),
        "noiseless": ChannelKind(builder=_noiseless, parameters=("k",)),
    }
    return kinds


def make_standard(kind: str, *params: Any) -> Channel:
    """Build a standard channel by name

    Example:
        ```
        bsc = make_standard("bsc", 0.1)
        ring = make_standard("typewriter", 5, 0.5)
        flat = make_standard("useless", [0.3, 0.7])
        ```

    Args:
        kind (str): one of the keys of `define_channels()`
        *params (Any): parameters of the construction

    Raises:
        BadParameter: unknown kind, wrong number of parameters or values out of range

    Returns:
        Channel: the requested channel
    """
    kinds = define_channels()
    if kind not in kinds:
        raise BadParameter(f"unknown channel kind {kind!r}, expected one of {sorted(kinds)}")
    builder: Callable[..., Channel] = kinds[kind].builder
    expected = kinds[kind].parameters
    required = 1 if kind == "useless" else len(expected)
    if not required <= len(params) <= len(expected):
        raise BadParameter(f"{kind} takes parameters {expected}, got {len(params)} values")
    return builder(*params)
