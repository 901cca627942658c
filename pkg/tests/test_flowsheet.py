import dataclasses as dc
import random

import numpy as np
import pytest

from faultrules.kinetics import (
    KineticsError,
    R_GAS,
    SPECIES,
    default_kinetics,
    mixture_cp,
    mixture_mw,
    reaction_rates,
)
from faultrules.flowsheet import (
    ControllerState,
    FlowsheetError,
    LeakConfig,
    MONITORED_VARS,
    PiGains,
    ProcessState,
    SteadyState,
    Trajectory,
    Unsolved,
    controller_step,
    default_config,
    simulate_dynamic,
    solve_static,
    with_c2h4_fraction,
)

TIMEPOINTS = (2, 4, 6, 8, 10, 20, 30, 40, 60, 80, 100)


@pytest.fixture(scope="module")
def nominal():
    out = solve_static(default_config())
    assert isinstance(out, SteadyState)
    return out


class TestReactionRates:
    CONC = {"c2h4": 4.0, "o2": 14.0, "c2h4o": 1.2, "co2": 3.0, "h2o": 1.5, "n2": 140.0}

    def test_zero_ethylene_zeroes_main_rate(self):
        conc = dict(self.CONC, c2h4=0.0)
        rates = reaction_rates(470.0, conc, default_kinetics())
        assert rates["main"] == 0.0
        assert rates["side1"] == 0.0
        assert rates["side2"] > 0.0  # product combustion only needs C2H4O

    def test_preexponential_linearity(self):
        kin = default_kinetics()
        doubled = dc.replace(kin, main=dc.replace(kin.main, k0=2 * kin.main.k0))
        r1 = reaction_rates(470.0, self.CONC, kin)
        r2 = reaction_rates(470.0, self.CONC, doubled)
        assert r2["main"] == pytest.approx(2 * r1["main"], rel=1e-12)
        assert r2["side1"] == r1["side1"]

    def test_strictly_increasing_in_temperature(self):
        kin = default_kinetics()
        rates = [reaction_rates(t, self.CONC, kin) for t in (420.0, 460.0, 500.0, 540.0)]
        for lo, hi in zip(rates, rates[1:]):
            assert all(hi[k] > lo[k] for k in lo)

    # regression values computed once from the frozen constants
    GOLDEN = {
        430.0: {"main": 1.2604212955e-02, "side1": 3.4058631553e-05, "side2": 2.9199228931e-06},
        470.0: {"main": 2.2854412534e-02, "side1": 4.6711761734e-04, "side2": 4.1999757431e-05},
        520.0: {"main": 4.2278772989e-02, "side1": 6.9967510492e-03, "side2": 6.6082907348e-04},
    }

    @pytest.mark.parametrize("temp", sorted(GOLDEN))
    def test_golden_rates(self, temp):
        rates = reaction_rates(temp, self.CONC, default_kinetics())
        for name, want in self.GOLDEN[temp].items():
            assert rates[name] == pytest.approx(want, rel=1e-9)

    def test_negative_temperature_rejected(self):
        with pytest.raises(KineticsError):
            reaction_rates(-3.0, self.CONC, default_kinetics())


class TestStaticSolve:
    def test_nominal_exothermic(self, nominal):
        s = nominal.state
        assert s.r1_t2 > s.m1_pv
        assert 0.3 <= s.r1_xmax <= 0.6
        assert nominal.diagnostics.residual < 1e-8

    def test_low_source_pressure_lowers_suction(self, nominal):
        cfg = default_config()
        for p_src in (1.6, 1.75, 1.9, 1.98):
            out = solve_static(dc.replace(cfg, source=dc.replace(cfg.source, pressure=p_src)))
            assert isinstance(out, SteadyState)
            assert out.state.k1_p1 < nominal.state.k1_p1

    def test_leak_raises_residence_time_and_product_fraction(self, nominal):
        cfg = default_config()
        out = solve_static(dc.replace(cfg, leak=LeakConfig("beforeCompressor", 0.3)))
        assert isinstance(out, SteadyState)
        assert out.state.r1_tau > nominal.state.r1_tau
        assert out.state.snk1_z_c2h4o > nominal.state.snk1_z_c2h4o

    def test_total_cooling_loss_has_no_steady_state(self):
        cfg = default_config()
        hx = dc.replace(cfg.heat_exchanger, outlet_valve_pos=0.0)
        out = solve_static(dc.replace(cfg, heat_exchanger=hx))
        assert isinstance(out, Unsolved)
        assert "runaway" in out.reason

    def test_pressure_monotone_along_flow_path(self, nominal):
        s = nominal.state
        assert s.k1_p2 > s.k1_p1
        assert s.snk1_p <= s.k1_p2


def species_closure(diag, cfg):
    """Independent steady-state species balance: in - out + generation = 0."""
    t = diag.t_reactor
    k1_p2 = cfg.sink.pressure + cfg.sink.line_drop + cfg.sink.line_resistance * (diag.n_reactor_in * mixture_mw(diag.z_in)) ** 2
    c_tot = k1_p2 * 1e5 / (R_GAS * t)
    conc = {sp: x * c_tot for sp, x in zip(SPECIES, diag.x_out)}
    rates = reaction_rates(t, conc, cfg.reactor.kinetics)
    worst = 0.0
    v = cfg.reactor.volume
    kin = cfg.reactor.kinetics
    for i, sp in enumerate(SPECIES):
        gen = sum(rates[rx.name] * rx.stoich_map.get(sp, 0.0) for rx in kin.reactions)
        res = diag.n_reactor_in * diag.z_in[i] - diag.n_reactor_out * diag.x_out[i] + v * gen
        worst = max(worst, abs(res) / diag.n_source)
    return worst


def energy_closure(diag, cfg):
    """Compressor work + reaction heat - HX duty - sensible stream change = 0,
    in the model's constant-cp ideal-gas convention."""
    t = diag.t_reactor
    k1_p2 = cfg.sink.pressure + cfg.sink.line_drop + cfg.sink.line_resistance * (diag.n_reactor_in * mixture_mw(diag.z_in)) ** 2
    c_tot = k1_p2 * 1e5 / (R_GAS * t)
    conc = {sp: x * c_tot for sp, x in zip(SPECIES, diag.x_out)}
    rates = reaction_rates(t, conc, cfg.reactor.kinetics)
    q_rxn = cfg.reactor.volume * sum(
        rates[rx.name] * (-rx.heat_of_reaction) for rx in cfg.reactor.kinetics.reactions
    )
    cp_in = mixture_cp(diag.z_in)
    sensible = diag.n_reactor_in * cp_in * (diag.t_reactor - diag.t_source)
    leak_sensible = 0.0
    if cfg.leak.location == "afterCompressor" and diag.n_leak > 0:
        leak_sensible = diag.n_leak * cp_in * (diag.t_comp_out - diag.t_source)
    budget = diag.power_w + q_rxn - diag.duty_w - sensible - leak_sensible
    scale = abs(diag.power_w) + abs(q_rxn) + abs(diag.duty_w)
    return abs(budget) / scale


def random_solvable_config(rng):
    cfg = default_config()
    choice = rng.randrange(7)
    if choice == 0:
        cfg = dc.replace(cfg, source=dc.replace(cfg.source, pressure=rng.uniform(1.6, 2.1)))
    elif choice == 1:
        cfg = dc.replace(cfg, flow_controller=dc.replace(cfg.flow_controller, setpoint=rng.uniform(0.6, 1.05)))
    elif choice == 2:
        cfg = dc.replace(cfg, heat_exchanger=dc.replace(cfg.heat_exchanger, tc_setpoint=rng.uniform(132.0, 158.0)))
    elif choice == 3:
        cfg = dc.replace(cfg, leak=LeakConfig("beforeCompressor", rng.uniform(0.0, 0.35)))
    elif choice == 4:
        cfg = dc.replace(cfg, heat_exchanger=dc.replace(cfg.heat_exchanger, cw_pressure=rng.uniform(1.5, 10.0)))
    elif choice == 5:
        cfg = dc.replace(cfg, source=with_c2h4_fraction(cfg.source, rng.uniform(0.004, 0.028)))
    else:
        cfg = dc.replace(cfg, sink=dc.replace(cfg.sink, pressure=rng.uniform(6.5, 7.8)))
    return cfg


class TestConservation:
    def test_balances_close_on_random_sweep(self):
        rng = random.Random(42)
        solved = 0
        attempts = 0
        while solved < 40 and attempts < 120:
            attempts += 1
            cfg = random_solvable_config(rng)
            out = solve_static(cfg)
            if isinstance(out, Unsolved):
                continue
            solved += 1
            assert species_closure(out.diagnostics, cfg) <= 1e-6
            assert energy_closure(out.diagnostics, cfg) <= 1e-5
        assert solved >= 40


class TestDynamics:
    def test_unperturbed_run_stays_at_steady_state(self, nominal):
        cfg = default_config()
        out = simulate_dynamic(cfg, cfg, TIMEPOINTS, noise_seed=None)
        assert isinstance(out, Trajectory)
        assert out.times[0] == 0.0 and len(out.states) == len(TIMEPOINTS) + 1
        for s in out.states:
            for a, b in zip(s.as_row(), nominal.state.as_row()):
                assert a == pytest.approx(b, abs=1e-9, rel=1e-9)

    def test_long_horizon_matches_static(self, nominal):
        cfg = default_config()
        pcfg = dc.replace(cfg, flow_controller=dc.replace(cfg.flow_controller, setpoint=0.8))
        static = solve_static(pcfg)
        out = simulate_dynamic(cfg, pcfg, [1500.0], noise_seed=None)
        assert isinstance(static, SteadyState) and isinstance(out, Trajectory)
        for a, b in zip(out.states[-1].as_row(), static.state.as_row()):
            assert a == pytest.approx(b, rel=0.01, abs=1e-6)

    def test_cooling_valve_closed_drives_temperature_up(self):
        cfg = default_config()
        hx = dc.replace(cfg.heat_exchanger, outlet_valve_pos=0.0)
        out = simulate_dynamic(cfg, dc.replace(cfg, heat_exchanger=hx), TIMEPOINTS, noise_seed=None)
        assert isinstance(out, Trajectory)
        m1 = [s.m1_pv for s in out.states]
        assert all(b > a - 1e-9 for a, b in zip(m1, m1[1:]))
        assert m1[-1] > m1[0] + 30

    def test_runaway_detected_on_long_horizon(self):
        cfg = default_config()
        hx = dc.replace(cfg.heat_exchanger, outlet_valve_pos=0.0)
        out = simulate_dynamic(cfg, dc.replace(cfg, heat_exchanger=hx), list(range(50, 801, 50)), noise_seed=None)
        assert isinstance(out, Unsolved)
        assert "runaway" in out.reason

    def test_composition_simplex_preserved(self):
        cfg = default_config()
        pcfg = dc.replace(cfg, source=with_c2h4_fraction(cfg.source, 0.008))
        out = simulate_dynamic(cfg, pcfg, TIMEPOINTS, noise_seed=None)
        assert isinstance(out, Trajectory)
        for s in out.states:
            d = None
            # reconstruct reactor fractions from monitored outlet variables
            assert 0.0 <= s.snk1_z_c2h4o <= 1.0
            assert 0.0 <= s.r1_zout_o2 <= 1.0

    def test_trajectory_determinism(self):
        cfg = default_config()
        pcfg = dc.replace(cfg, leak=LeakConfig("beforeCompressor", 0.22))
        a = simulate_dynamic(cfg, pcfg, TIMEPOINTS, noise_seed=1234)
        b = simulate_dynamic(cfg, pcfg, TIMEPOINTS, noise_seed=1234)
        assert isinstance(a, Trajectory)
        assert [s.as_row() for s in a.states] == [s.as_row() for s in b.states]

    def test_noise_applied_to_unpinned_only(self, nominal):
        cfg = default_config()
        out = simulate_dynamic(cfg, cfg, [2.0], noise_seed=7, pinned=frozenset({"srcr1_p"}))
        assert isinstance(out, Trajectory)
        s = out.states[-1]
        assert s.srcr1_p == nominal.state.srcr1_p
        assert s.m1_pv != pytest.approx(nominal.state.m1_pv, abs=1e-12)

    def test_bad_timepoints_rejected(self):
        cfg = default_config()
        with pytest.raises(FlowsheetError):
            simulate_dynamic(cfg, cfg, [2.0, 2.0])
        with pytest.raises(FlowsheetError):
            simulate_dynamic(cfg, cfg, [-1.0, 2.0])


class TestExothermicCoupling:
    def test_conversion_correlates_with_temperature_rise(self):
        cfg = default_config()
        points = []
        for sp in (142.0, 146.0, 150.0, 154.0, 158.0):
            hx = dc.replace(cfg.heat_exchanger, tc_setpoint=sp)
            out = solve_static(dc.replace(cfg, heat_exchanger=hx))
            assert isinstance(out, SteadyState)
            points.append((out.state.r1_xmax, out.state.r1_t2 - out.state.m1_pv))
        xs, dts = zip(*sorted(points))
        corr = np.corrcoef(xs, dts)[0, 1]
        assert corr > 0.9


class TestControllerStep:
    GAINS = PiGains(kp=0.5, ki=0.05, bias=0.4, direct=False)

    def test_on_setpoint_output_is_bias(self):
        state, out = controller_step(self.GAINS, ControllerState(), 1.0, 1.0, 0.1)
        assert out == pytest.approx(self.GAINS.bias)
        assert state.integral == 0.0

    def test_flow_below_setpoint_opens_valve(self):
        _, out = controller_step(self.GAINS, ControllerState(), 1.0, 0.8, 0.1)
        assert out > self.GAINS.bias

    def test_output_clamped(self):
        _, out = controller_step(self.GAINS, ControllerState(), 10.0, 0.0, 0.1)
        assert out == 1.0
        _, out = controller_step(self.GAINS, ControllerState(), 0.0, 10.0, 0.1)
        assert out == 0.0

    def test_antiwindup_bounds_integral(self):
        state = ControllerState()
        for _ in range(10_000):
            state, _ = controller_step(self.GAINS, state, 1.0, 0.0, 1.0)
        assert state.integral <= 1.3 / self.GAINS.ki + 1e-9

    def test_setpoint_step_settles_within_five_percent(self):
        cfg = default_config()
        pcfg = dc.replace(cfg, flow_controller=dc.replace(cfg.flow_controller, setpoint=0.9))
        out = simulate_dynamic(cfg, pcfg, [100.0], noise_seed=None)
        assert isinstance(out, Trajectory)
        assert abs(out.states[-1].m2_pv - 0.9) <= 0.045

    def test_bad_dt(self):
        with pytest.raises(FlowsheetError):
            controller_step(self.GAINS, ControllerState(), 1.0, 1.0, 0.0)


class TestGoldenSnapshot:
    def test_nominal_steady_state_matches_csv_fixture(self, nominal):
        import csv
        from pathlib import Path

        path = Path(__file__).parent / "fixtures" / "nominal_steady_state.csv"
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            row = [float(v) for v in next(reader)]
        assert tuple(header) == MONITORED_VARS
        for name, want, got in zip(header, row, nominal.state.as_row()):
            assert got == pytest.approx(want, rel=1e-12), name


class TestProcessState:
    def test_row_round_trip(self, nominal):
        row = nominal.state.as_row()
        assert ProcessState.from_row(row) == nominal.state
        assert len(row) == 25 and len(MONITORED_VARS) == 25

    def test_invariant_violations_rejected(self, nominal):
        row = list(nominal.state.as_row())
        row[MONITORED_VARS.index("r1_xmax")] = 1.7
        with pytest.raises(FlowsheetError):
            ProcessState.from_row(row)
        row = list(nominal.state.as_row())
        row[MONITORED_VARS.index("m1_pv")] = -400.0
        with pytest.raises(FlowsheetError):
            ProcessState.from_row(row)
