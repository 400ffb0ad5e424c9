import numpy as np
import pytest

from channel_models.errors import BadParameter
from channel_models.standard_channels import define_channels, make_standard


def test_registry_lists_every_kind():
    expected = {"bsc", "bec", "zchannel", "typewriter", "useless", "noiseless"}
    assert set(define_channels()) == expected


def test_bsc():
    np.testing.assert_allclose(make_standard("bsc", 0.1).matrix, [[0.9, 0.1], [0.1, 0.9]])


def test_bec_outputs():
    channel = make_standard("bec", 0.3)
    assert channel.output_labels == ("0", "e", "1")
    np.testing.assert_allclose(channel.matrix, [[0.7, 0.3, 0.0], [0.0, 0.3, 0.7]])


def test_zchannel():
    np.testing.assert_allclose(make_standard("zchannel", 0.2).matrix, [[1.0, 0.0], [0.2, 0.8]])


def test_typewriter_wraps_around():
    channel = make_standard("typewriter", 5, 0.5)
    assert channel.matrix[4, 0] == 0.5
    assert channel.matrix[4, 4] == 0.5
    assert np.count_nonzero(channel.matrix) == 10


def test_useless_repeats_q():
    channel = make_standard("useless", [0.25, 0.75], 3)
    assert channel.shape == (3, 2)
    assert np.all(channel.matrix == channel.matrix[0])


def test_noiseless_is_identity():
    np.testing.assert_array_equal(make_standard("noiseless", 3).matrix, np.eye(3))


@pytest.mark.parametrize(
    "kind, params",
    [
        ("bsc", (1.5,)),
        ("bsc", ("x",)),
        ("bsc", ()),
        ("typewriter", (1, 0.5)),
        ("typewriter", ("five", 0.5)),
        ("useless", ([0.5, 0.6],)),
        ("noiseless", (2.5,)),
        ("noiseless", (True,)),
        ("ring", (3,)),
    ],
)
def test_bad_parameters(kind, params):
    with pytest.raises(BadParameter):
        make_standard(kind, *params)
