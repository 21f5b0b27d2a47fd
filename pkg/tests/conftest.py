import pytest

from lipnet.geometry import NormKind
from lipnet.grid_fdd import default_grid_space, enumerate_grid
from lipnet.nets import Spiderweb, build_spiderweb_base
from lipnet.retract_fd import build_fd_family, build_ordered_net, ordered_net_from_base


@pytest.fixture(scope="session")
def base_1d():
    return build_spiderweb_base(1, NormKind.LINF, a=1.0, max_shell=8)


@pytest.fixture(scope="session")
def net_1d(base_1d):
    return ordered_net_from_base(base_1d)


@pytest.fixture(scope="session")
def family_1d(net_1d):
    return build_fd_family(net_1d)


@pytest.fixture(scope="session")
def base_2d():
    return build_spiderweb_base(2, NormKind.LINF, a=1.0, max_shell=4)


@pytest.fixture(scope="session")
def net_2d(base_2d):
    return ordered_net_from_base(base_2d)


@pytest.fixture(scope="session")
def family_2d(net_2d):
    return build_fd_family(net_2d)


@pytest.fixture(scope="session")
def grid_space_2d():
    return default_grid_space(n_blocks=2, dim=2, norm_kind=NormKind.LINF, max_shell=4)


@pytest.fixture(scope="session")
def grid_points_small(grid_space_2d):
    return enumerate_grid(grid_space_2d, (2, 2))


@pytest.fixture(scope="session")
def web_2d(base_2d):
    return Spiderweb(base=base_2d, extra_points=[], params=base_2d.params)
