import numpy as np
import pytest

import services.optimizer as optimizer
from services.cascade import MetricsReport
from services.emitter_scattering import ScatterKernel
from services.errors import WindowError
from services.optimizer import (
    PENALTY,
    Bounds,
    Objective,
    OptimizationSpec,
    objective_value,
    optimize_for_n,
    scan,
    start_points,
)
from services.pulse_domain import EmitterParams, gaussian_one_photon, make_grid
from services.results import ScanResult

BOUNDS = Bounds(sigma_k=(0.3, 0.9), delta=(0.5, 4.0), lambda1=(-1.0, 1.0), lambda2=(-1.0, 1.0))


def _spec(**overrides):
    values = dict(
        n_values=(1, 2),
        trap_modes=(True, False),
        bounds=BOUNDS,
        restarts=2,
        max_evals=15,
        grid=make_grid(64, 8.0),
        seed=11,
        threads=2,
    )
    values.update(overrides)
    return OptimizationSpec(**values)


def _kernel():
    return ScatterKernel.analytic(EmitterParams(1.0, 2.0))


def test_objectives_score_metrics():
    metrics = MetricsReport(
        n_rounds=1,
        overlap=-0.5 + 0j,
        fidelity=0.765625,
        p_success=0.875,
        p_fail=0.125,
        norm_drift=0.0,
        linear_phase=0.0,
        phase_difference=np.pi,
    )
    assert Objective.CZ_INFIDELITY.score(metrics) == pytest.approx(0.234375)
    assert Objective.SORTER_PFAIL.score(metrics) == 0.125
    assert Objective("sorter_pfail") is Objective.SORTER_PFAIL


@pytest.mark.parametrize(
    "kwargs",
    [
        {"sigma_k": (1.0, 1.0)},
        {"delta": (3.0, 1.0)},
        {"sigma_k": (0.0, 1.0)},
    ],
)
def test_bounds_validation(kwargs):
    with pytest.raises(ValueError):
        Bounds(**kwargs)


@pytest.mark.parametrize(
    "kwargs",
    [{"restarts": 0}, {"n_values": ()}, {"n_values": (0, 1)}, {"max_evals": 0}],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        _spec(**kwargs)


def test_box_dimension_follows_trap_mode():
    assert len(BOUNDS.box(True)) == 4
    assert len(BOUNDS.box(False)) == 2


def test_start_points_are_seeded_and_clipped():
    spec = _spec(start=(5.0, 2.0, 0.1, -0.1))
    first = start_points(3, True, spec, warm_start=(0.5, 1.0, 0.2, 0.3))
    second = start_points(3, True, spec, warm_start=(0.5, 1.0, 0.2, 0.3))
    assert len(first) == 2 + 1 + spec.restarts
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_allclose(first[0], [0.9, 2.0, 0.1, -0.1])
    np.testing.assert_allclose(first[2], [0.6, 2.25, 0.0, 0.0])
    box = np.array(BOUNDS.box(True))
    for point in first:
        assert np.all(point >= box[:, 0]) and np.all(point <= box[:, 1])

    other_seed = start_points(3, True, _spec(seed=12))
    assert not np.array_equal(other_seed[-1], start_points(3, True, _spec())[-1])
    assert len(start_points(3, False, spec)[0]) == 2


def test_infeasible_points_get_the_penalty():
    spec = _spec()
    # sigma_k = 2 does not fit a window of half-width 8
    assert objective_value(1, [2.0, 1.0], False, spec, _kernel()) == PENALTY
    value = objective_value(1, [0.6, 1.0], False, spec, _kernel())
    assert 0.0 <= value < PENALTY


@pytest.mark.asyncio
@pytest.mark.parametrize("trap", [True, False])
async def test_optimize_for_n_is_deterministic_and_improves_on_the_centre(trap):
    spec = _spec()
    first = await optimize_for_n(2, spec, _kernel(), trap)
    second = await optimize_for_n(2, spec, _kernel(), trap)
    assert first == second
    assert first.n == 2 and first.trap is trap
    assert (first.lambda1 is None) is not trap
    assert first.grid_m == 64
    assert first.evals > 0
    centre = np.mean(np.array(BOUNDS.box(trap)), axis=1)
    assert first.infidelity <= objective_value(2, centre, trap, spec, _kernel()) + 1e-12
    assert BOUNDS.sigma_k[0] <= first.sigma_k <= BOUNDS.sigma_k[1]
    assert BOUNDS.delta[0] <= first.delta <= BOUNDS.delta[1]


@pytest.mark.asyncio
async def test_sorter_objective_reports_failure_probability():
    spec = _spec(objective=Objective.SORTER_PFAIL)
    row = await optimize_for_n(1, spec, _kernel(), trap=False)
    assert row.p_fail == pytest.approx(1.0 - row.p_success)
    assert 0.0 <= row.p_fail <= 0.5 + 1e-3


@pytest.mark.asyncio
async def test_scan_covers_every_mode_and_round_count():
    result = await scan(_spec(), _kernel())
    assert [(row.trap, row.n) for row in result.rows] == [
        (True, 1),
        (True, 2),
        (False, 1),
        (False, 2),
    ]


@pytest.mark.asyncio
async def test_scan_skips_failed_rows(monkeypatch):
    original = optimizer.optimize_for_n
    calls = []

    async def flaky(n, spec, kernel, trap=True, warm_start=None, semaphore=None):
        calls.append((n, warm_start))
        if n == 1:
            raise RuntimeError("boom")
        return await original(n, spec, kernel, trap, warm_start, semaphore)

    monkeypatch.setattr(optimizer, "optimize_for_n", flaky)
    result = await scan(_spec(trap_modes=(False,)), _kernel())
    assert [row.n for row in result.rows] == [2]
    assert calls == [(1, None), (2, None)]


def test_search_box_keeps_the_input_pulse_inside_the_window():
    spec = _spec(bounds=Bounds(), k0=2.0)
    box = spec.search_box(True)
    assert box[0] == (0.05, 0.75)
    assert box[1:] == Bounds().box(True)[1:]
    for point in start_points(1, True, spec, warm_start=(4.0, 1.0, 0.0, 0.0)):
        assert 0.05 <= point[0] <= 0.75
        gaussian_one_photon(spec.grid, point[0], spec.k0)
    with pytest.raises(ValueError):
        _spec(grid=make_grid(64, 0.2))


@pytest.mark.asyncio
async def test_row_is_flagged_when_no_point_can_be_evaluated(monkeypatch):
    def out_of_window(config, layout):
        raise WindowError("pulse leaves the momentum window")

    monkeypatch.setattr(optimizer, "evaluate", out_of_window)
    row = await optimize_for_n(1, _spec(max_evals=5), _kernel(), trap=False)
    assert not row.converged
    assert np.isnan(row.fidelity) and np.isnan(row.p_fail)
    assert row.evals > 0 and row.grid_m == 64
    assert BOUNDS.sigma_k[0] <= row.sigma_k <= BOUNDS.sigma_k[1]
    result = ScanResult()
    result.add(row)
    line = result.to_csv().splitlines()[1].split(",")
    assert line[1] == "off"
    assert line[4:10] == ["", "", "", "", "", ""]
    assert line[11] == "false"


@pytest.mark.asyncio
async def test_certified_row_reproduces_under_a_fresh_evaluation():
    spec = _spec()
    row = await optimize_for_n(2, spec, _kernel(), trap=True)
    config = optimizer.build_config(row.n, row.parameters, row.trap, spec, _kernel())
    metrics = optimizer.evaluate(config, spec.sorter_layout)
    assert metrics.fidelity == pytest.approx(row.fidelity, abs=1e-8)
    assert metrics.p_fail == pytest.approx(row.p_fail, abs=1e-8)
