import pytest

from commutesim.synth import ScenarioConfig, generate_scenario


@pytest.fixture(scope="session")
def small_scenario(tmp_path_factory):
    """2x2-zone city, 400 commuters, written to disk once per session."""
    out = tmp_path_factory.mktemp("small_scenario")
    return generate_scenario(
        ScenarioConfig(zones_per_side=2, nodes_per_zone_side=4,
                       mask_cells_per_zone_side=4, commuters=400, seed=42),
        out_dir=str(out))


@pytest.fixture(scope="session")
def midsize_scenario(tmp_path_factory):
    """5x5-zone city used by metric and stats integration tests."""
    out = tmp_path_factory.mktemp("midsize_scenario")
    return generate_scenario(
        ScenarioConfig(zones_per_side=5, nodes_per_zone_side=4,
                       mask_cells_per_zone_side=4, commuters=5000,
                       wage_shape="monotone", seed=7),
        out_dir=str(out))
