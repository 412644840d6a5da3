import math

import pytest
from pydantic import ValidationError
from scipy.special import lambertw

from app.config import settings
from app.exceptions import DomainError, InsufficientData, TooSmallBudget
from app.services.eppstein import solve, triv_red
from app.services.hybrid import (
    Branch,
    FrameworkSpec,
    HybridConfig,
    HybridSolver,
    SpaceModel,
    SpacePoint,
    branch_states,
    calibrate,
    default_model,
    derivative_lower_bound,
    f_inverse,
    fit_space_model,
    hybrid_solve,
    lambert_w_m1,
    measure,
    negative_model_exponent,
    recurrence_exponent,
    speedup_exponent,
    speedup_table,
    theorem_bound,
    threshold,
)
from app.services.qsim import qubit_accounting

LINEAR = SpaceModel(A=0.0, B=1.0, a=0.0)
UNIT = SpaceModel(A=1.0, B=1.0)
LOG_HEAVY = SpaceModel(A=12.0, B=48.0, a=16.0)


# Lambert W


def test_lambert_known_value():
    assert lambert_w_m1(-0.1) == pytest.approx(-3.577152063957297, abs=1e-12)


@pytest.mark.parametrize("x", [-0.367, -0.3, -0.2, -0.1, -1e-3, -1e-8, -1e-200])
def test_lambert_matches_scipy(x):
    assert lambert_w_m1(x) == pytest.approx(lambertw(x, -1).real, rel=1e-10)


def test_lambert_residual_on_a_sweep():
    for k in range(1, 200):
        x = -math.exp(-1.0 - k / 10.0)
        w = lambert_w_m1(x)
        assert w <= -1.0
        assert w * math.exp(w) == pytest.approx(x, rel=1e-12)


def test_lambert_at_branch_point():
    assert lambert_w_m1(-1.0 / math.e) == pytest.approx(-1.0, abs=1e-6)


@pytest.mark.parametrize("x", [0.0, 0.1, -0.5, math.nan])
def test_lambert_domain(x):
    with pytest.raises(DomainError):
        lambert_w_m1(x)


# Space model


def test_model_validation():
    with pytest.raises(ValidationError):
        SpaceModel(A=0.0, B=0.0)
    with pytest.raises(ValidationError):
        SpaceModel(A=-1.0, B=1.0)


def test_model_peak():
    model = SpaceModel(A=2.0, B=2.0)
    assert model.lam_tilde == pytest.approx(1.0)
    assert model.f_max == pytest.approx(2.0)
    assert model.F(model.lam_tilde) == pytest.approx(model.f_max)
    assert LINEAR.lam_tilde == math.inf


def test_model_save_load(tmp_path):
    path = tmp_path / "model.json"
    SpaceModel(A=3.5, B=40.0, a=7.25).save(path)
    assert SpaceModel.load(path) == SpaceModel(A=3.5, B=40.0, a=7.25)


def test_default_model_comes_from_settings(monkeypatch):
    monkeypatch.setattr(settings, "SPACE_MODEL_FILE", None)
    model = default_model()
    assert (model.A, model.B, model.a) == (settings.SPACE_MODEL_A, settings.SPACE_MODEL_B, settings.SPACE_MODEL_LOG)


@pytest.mark.parametrize("c", [1e-6, 0.01, 0.1, 0.5, 0.9, 0.999])
def test_f_inverse_round_trip(c):
    lam = f_inverse(c, UNIT)
    assert 0 < lam < UNIT.lam_tilde
    assert UNIT.F(lam) == pytest.approx(c, rel=1e-10)


def test_f_inverse_linear_model():
    assert f_inverse(0.25, SpaceModel(A=0.0, B=4.0)) == pytest.approx(0.0625)


def test_f_inverse_with_underflowing_argument():
    model = SpaceModel(A=1.0, B=700.0)
    lam = f_inverse(1e-30, model)
    assert model.F(lam) == pytest.approx(1e-30, rel=1e-9)


def test_f_inverse_domain():
    with pytest.raises(DomainError):
        f_inverse(1.0, UNIT)
    with pytest.raises(DomainError):
        f_inverse(0.0, UNIT)


def test_config_validation():
    with pytest.raises(ValidationError):
        HybridConfig(c=0.0)
    with pytest.raises(ValidationError):
        HybridConfig(c=0.1, gamma=0.25, gamma_q=0.3)
    assert HybridConfig(c=0.5).budget(9) == 4
    with pytest.raises(DomainError):
        HybridConfig(c=3.0).check_model(SpaceModel(A=2.0, B=2.0))


def test_threshold_linear_model():
    assert threshold(HybridConfig(c=0.5), LINEAR, 100) == 50


def test_threshold_is_the_largest_admissible_size():
    model = SpaceModel(A=1.0, B=1.0, a=1.0)
    cfg = HybridConfig(c=0.5)
    n = 1000
    s = threshold(cfg, model, n)
    assert model.G(s, n) <= cfg.c * n < model.G(s + 1, n)


def test_threshold_needs_room_above_the_log_term():
    with pytest.raises(TooSmallBudget):
        threshold(HybridConfig(c=0.1), LOG_HEAVY, 10)


def test_speedup_and_negative_model():
    assert speedup_exponent(HybridConfig(c=0.5), LINEAR) == pytest.approx(0.5 / 12)
    assert negative_model_exponent(0.5, 16) == pytest.approx(1 / 3 - 0.125)
    with pytest.raises(DomainError):
        negative_model_exponent(0.5, 1)


def test_derivative_lower_bound():
    assert derivative_lower_bound(UNIT, 0.5) == pytest.approx(math.log(2.0), rel=1e-9)
    with pytest.raises(DomainError):
        derivative_lower_bound(UNIT, 2.0)


def test_theorem_bound_takes_the_larger_term():
    cfg = HybridConfig(c=0.5)
    assert theorem_bound(cfg, LINEAR, 12, 24) == pytest.approx(8.0)
    assert theorem_bound(cfg, LINEAR, 40, 24) == pytest.approx(2.0 ** (40 / 3 - 1))


def test_speedup_table_shape():
    rows = speedup_table(default_model(), [0.1, 1.0, 300.0], [16, 4096])
    assert len(rows) == 6
    assert all(r["negative_gap"] == pytest.approx(r["c"] / math.log2(r["n"])) for r in rows)
    assert rows[0]["s_tilde"] is None
    assert rows[-1]["f_c"] is None and rows[-1]["s_tilde"] is None


# Recurrences


def test_recurrence_of_the_classical_cases():
    framework = FrameworkSpec.from_matrix([[3, 2, 5], [3, 5, 2]])
    assert recurrence_exponent(framework) == pytest.approx(1 / 3, abs=1e-9)


@pytest.mark.parametrize("delta", [4, 8, 16])
def test_recurrence_of_the_framework_example(delta):
    t = 3 * delta
    framework = FrameworkSpec(cases=[
        [Branch(decrease=1, count=2)],
        [Branch(decrease=delta, count=t * t * 2 ** delta)],
    ])
    assert recurrence_exponent(framework) == pytest.approx(1 + 2 * math.log2(t) / delta, abs=1e-9)


def test_recurrence_without_branching():
    assert recurrence_exponent(FrameworkSpec(cases=[[Branch(decrease=1)]])) == 0.0


def test_framework_validation():
    with pytest.raises(ValidationError):
        Branch(decrease=0)
    with pytest.raises(ValueError):
        FrameworkSpec.from_matrix([[1, 2], [3]])
    with pytest.raises(ValueError):
        FrameworkSpec.from_matrix([[1, 0], [2, 0]])


# Calibration


def _points(model, pairs, noise=None):
    noise = noise or [1.0] * len(pairs)
    return [SpacePoint(s, n, model.G(s, n) * f) for (s, n), f in zip(pairs, noise)]


PAIRS = [(2, 10), (4, 10), (3, 20), (5, 40), (8, 40), (6, 100)]


def test_fit_recovers_an_exact_model():
    truth = SpaceModel(A=2.0, B=3.0, a=1.0)
    result = fit_space_model(_points(truth, PAIRS))
    assert result.fitted.A == pytest.approx(2.0, rel=1e-6)
    assert result.fitted.B == pytest.approx(3.0, rel=1e-6)
    assert result.fitted.a == pytest.approx(1.0, rel=1e-6)
    assert result.inflation == pytest.approx(1.0)
    assert result.coverage == 1.0


def test_fit_inflates_to_cover_the_measurements():
    truth = SpaceModel(A=2.0, B=3.0, a=1.0)
    points = _points(truth, PAIRS, [1.0, 1.1, 0.9, 1.05, 0.95, 1.2])
    result = fit_space_model(points, coverage=1.0)
    assert result.inflation >= 1.0
    assert result.coverage == 1.0
    assert result.model.A == pytest.approx(result.fitted.A * result.inflation)
    for p in points:
        assert result.model.G(p.s, p.n) >= p.bits * (1 - 1e-12)


def test_fit_needs_enough_distinct_points():
    truth = SpaceModel(A=2.0, B=3.0, a=1.0)
    with pytest.raises(InsufficientData):
        fit_space_model(_points(truth, PAIRS[:2]))
    with pytest.raises(InsufficientData):
        fit_space_model(_points(truth, [(4, 10)] * 5))


def test_branch_states_start_at_the_reduced_root(q3):
    states = branch_states(q3, 4)
    assert 1 <= len(states) <= 4
    assert states[0] == triv_red(q3)[0]


def test_calibration_on_measured_space(k33, q3):
    points = measure([k33, q3], per_instance=4)
    assert {p.n for p in points} == {6, 8}
    assert all(p.bits > 0 for p in points)
    result = calibrate([k33, q3], per_instance=4)
    assert result.coverage >= settings.CALIBRATION_COVERAGE
    assert len(result.points) == len(points)


# Hybrid solver


def test_small_budget_falls_back_to_classical(k33):
    verdict = hybrid_solve(k33, HybridConfig(c=0.1), LOG_HEAVY)
    assert verdict.result
    assert verdict.s_tilde is None
    assert verdict.quantum_calls == 0
    assert verdict.classical_nodes == solve(k33).stats.nodes_expanded


def test_small_budget_is_fatal_when_strict(k33):
    with pytest.raises(TooSmallBudget):
        hybrid_solve(k33, HybridConfig(c=0.1, strict=True), LOG_HEAVY)


def test_model_must_admit_c(k33):
    with pytest.raises(DomainError):
        hybrid_solve(k33, HybridConfig(c=0.5), SpaceModel(A=1.0, B=0.0))


def test_root_handed_off_when_it_fits(q3):
    space = qubit_accounting(triv_red(q3)[0]).total_bits
    verdict = HybridSolver(HybridConfig(c=(space + 1) / q3.n), LINEAR).solve(q3)
    assert verdict.result
    assert verdict.quantum_calls == 1
    assert verdict.handoff_depth == 0
    assert verdict.classical_nodes == 0
    handoff = verdict.stats.handoffs[0]
    assert handoff.s <= verdict.s_tilde
    assert handoff.space_bits <= verdict.budget
    assert verdict.modeled_cost == 1 + handoff.grover_estimate


def test_handoff_refused_when_space_exceeds_budget(q3):
    verdict = hybrid_solve(q3, HybridConfig(c=2.0), LINEAR)
    assert verdict.result
    assert verdict.s_tilde >= 8
    assert verdict.quantum_calls == 0
    assert verdict.stats.refused_handoffs >= 1


def test_default_model_reads_the_model_file(tmp_path, monkeypatch):
    path = tmp_path / "model.json"
    SpaceModel(A=2.5, B=90.0, a=3.0).save(path)
    monkeypatch.setattr(settings, "SPACE_MODEL_FILE", str(path))
    assert default_model() == SpaceModel(A=2.5, B=90.0, a=3.0)


@pytest.mark.parametrize("c", [0.1, 0.25, 0.5])
def test_default_model_admits_small_fractions(q3, monkeypatch, c):
    monkeypatch.setattr(settings, "SPACE_MODEL_FILE", None)
    verdict = hybrid_solve(q3, HybridConfig(c=c))
    assert verdict.s_tilde is not None
    assert verdict.result == solve(q3).result
    assert all(h.space_bits <= verdict.budget for h in verdict.stats.handoffs)


@pytest.mark.parametrize("name", ["q3", "petersen"])
def test_handoff_below_the_peak_matches_classical(name, request):
    inst = request.getfixturevalue(name)
    space = qubit_accounting(triv_red(inst)[0]).total_bits
    model = SpaceModel(A=1.0, B=12.0)
    cfg = HybridConfig(c=(space + 1) / inst.n)
    assert cfg.c < model.f_max
    verdict = HybridSolver(cfg, model).solve(inst)
    assert verdict.result == solve(inst).result
    assert verdict.quantum_calls >= 1
    for handoff in verdict.stats.handoffs:
        assert handoff.space_bits <= verdict.budget
        assert handoff.s <= verdict.s_tilde
