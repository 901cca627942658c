"""Lumped-parameter model of the ethylene-oxidation flowsheet.

Flow path:  source -> flow-control valve (with flow meter M2) -> optional leak
-> compressor K1 -> heat exchanger E2 (cooled by a cooling-water stream whose
flow is set by the temperature-control valve XC1 and a manual outlet valve)
-> CSTR reactor R1 -> sink.

Model structure
---------------
Pressures and flows are quasi-static: the flow-control valve and the
compressor suction characteristic close a small algebraic loop, the discharge
pressure is set by the sink backpressure plus a line drop, and the heat
exchanger uses a counterflow effectiveness-NTU relation.  Dynamic states are
the reactor composition and temperature, the compressor-discharge and HX
outlet temperatures (first-order duct/metal lags), both valve actuators, and
the two controller integrals.  The static solver computes a root of the same
right-hand side the integrator uses, so a converged steady state has all time
derivatives below tolerance by construction and long-horizon dynamic runs
land on it.

Units: pressures bar, temperatures Kelvin internally (reported Celsius),
mass flow kg/s, energy W internally (reported kW).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .kinetics import (
    CP,
    CP_WATER,
    R_GAS,
    SPECIES,
    KineticsParams,
    default_kinetics,
    mixture_cp,
    mixture_mw,
)

T_ZERO = 273.15
#: Reactor temperature cap; beyond this the run is declared a thermal runaway.
T_RUNAWAY_CAP = 600.0 + T_ZERO
#: Fixed integrator step (s) with a 2x step-halving error check.
DT = 0.05
ACTUATOR_TAU = 2.0  # s, valve stroke lag
HX_LAG_TAU = 8.0  # s, HX outlet temperature measurement/metal lag
K1_LAG_TAU = 8.0  # s, compressor discharge duct/metal thermal lag
WINDUP_SPAN = 1.3  # |ki * integral| bound for anti-windup


class FlowsheetError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiGains:
    kp: float
    ki: float
    bias: float
    direct: bool  # True: output rises when measurement exceeds setpoint

    def setpoint_error(self, setpoint: float, measurement: float) -> float:
        return (measurement - setpoint) if self.direct else (setpoint - measurement)


@dataclass(frozen=True)
class SourceConfig:
    pressure: float  # bar
    temperature: float  # Celsius
    z: tuple[float, ...]  # mole fractions over SPECIES
    inventory_kmol: float

    def __post_init__(self) -> None:
        if self.pressure <= 0:
            raise FlowsheetError("source pressure must be positive")
        if len(self.z) != len(SPECIES):
            raise FlowsheetError(f"composition needs {len(SPECIES)} entries")
        if abs(sum(self.z) - 1.0) > 1e-9 or any(zi < 0 for zi in self.z):
            raise FlowsheetError("composition must be a simplex summing to 1")


@dataclass(frozen=True)
class FlowControllerConfig:
    setpoint: float  # kg/s
    gains: PiGains
    valve_coeff: float
    fixed_op: float | None = None  # manual / stuck valve position

    def __post_init__(self) -> None:
        if self.fixed_op is not None and not (0.0 <= self.fixed_op <= 1.0):
            raise FlowsheetError("valve position must lie in [0, 1]")


@dataclass(frozen=True)
class CompressorConfig:
    suction_coeff: float  # kg/s per bar of suction pressure
    efficiency: float

    def __post_init__(self) -> None:
        if not (0.0 < self.efficiency <= 1.0):
            raise FlowsheetError("isentropic efficiency must be in (0, 1]")


@dataclass(frozen=True)
class HeatExchangerConfig:
    ua: float  # kW/K
    cw_inlet_temp: float  # Celsius
    cw_pressure: float  # bar
    cw_return_pressure: float  # bar
    cw_valve_coeff: float
    outlet_valve_pos: float  # manual cooling-water outlet valve
    tc_setpoint: float  # Celsius, HX process outlet target
    tc_gains: PiGains
    tc_fixed_op: float | None = None

    def __post_init__(self) -> None:
        if self.cw_pressure <= 0:
            raise FlowsheetError("cooling-water pressure must be positive")
        if not (0.0 <= self.outlet_valve_pos <= 1.0):
            raise FlowsheetError("valve position must lie in [0, 1]")
        if self.tc_fixed_op is not None and not (0.0 <= self.tc_fixed_op <= 1.0):
            raise FlowsheetError("valve position must lie in [0, 1]")


@dataclass(frozen=True)
class ReactorConfig:
    volume: float  # m^3
    wall_heat_capacity: float  # J/K, vessel thermal inertia
    kinetics: KineticsParams


@dataclass(frozen=True)
class SinkConfig:
    pressure: float  # bar
    line_drop: float  # bar, fixed
    line_resistance: float  # bar/(kg/s)^2

    def __post_init__(self) -> None:
        if self.pressure <= 0:
            raise FlowsheetError("sink pressure must be positive")


LEAK_NONE = "none"
LEAK_BEFORE_COMPRESSOR = "beforeCompressor"
LEAK_AFTER_COMPRESSOR = "afterCompressor"


@dataclass(frozen=True)
class LeakConfig:
    location: str = LEAK_NONE
    fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.location not in (LEAK_NONE, LEAK_BEFORE_COMPRESSOR, LEAK_AFTER_COMPRESSOR):
            raise FlowsheetError(f"unknown leak location {self.location!r}")
        if not (0.0 <= self.fraction < 1.0):
            raise FlowsheetError("leak fraction must lie in [0, 1)")


@dataclass(frozen=True)
class FlowsheetConfig:
    source: SourceConfig
    flow_controller: FlowControllerConfig
    compressor: CompressorConfig
    heat_exchanger: HeatExchangerConfig
    reactor: ReactorConfig
    sink: SinkConfig
    leak: LeakConfig = LeakConfig()


def default_config() -> FlowsheetConfig:
    """The frozen nominal operating point all campaigns perturb from."""
    return FlowsheetConfig(
        source=SourceConfig(
            pressure=2.0,
            temperature=25.0,
            z=(0.025, 0.085, 0.0, 0.02, 0.0, 0.87),
            inventory_kmol=14880.0,
        ),
        flow_controller=FlowControllerConfig(
            setpoint=1.0,
            gains=PiGains(kp=20.0, ki=0.0, bias=0.6, direct=False),
            valve_coeff=0.011,
        ),
        compressor=CompressorConfig(suction_coeff=0.5263, efficiency=0.75),
        heat_exchanger=HeatExchangerConfig(
            ua=0.8,
            cw_inlet_temp=20.0,
            cw_pressure=10.0,
            cw_return_pressure=1.0,
            cw_valve_coeff=8.8e-6,
            outlet_valve_pos=1.0,
            tc_setpoint=150.0,
            tc_gains=PiGains(kp=0.03, ki=0.0003, bias=0.35, direct=True),
        ),
        reactor=ReactorConfig(volume=8.0, wall_heat_capacity=8.0e4, kinetics=default_kinetics()),
        sink=SinkConfig(pressure=7.0, line_drop=0.15, line_resistance=0.25),
    )


def with_c2h4_fraction(source: SourceConfig, z_c2h4: float) -> SourceConfig:
    """Set the ethylene feed fraction; the inert absorbs the difference."""
    z = list(source.z)
    idx_e, idx_inert = SPECIES.index("c2h4"), SPECIES.index("n2")
    delta = z[idx_e] - z_c2h4
    if z[idx_inert] + delta < -1e-12:
        raise FlowsheetError("inert fraction would go negative")
    z[idx_e] = z_c2h4
    z[idx_inert] = max(z[idx_inert] + delta, 0.0)
    return replace(source, z=tuple(z))


def with_c2h4_inventory(source: SourceConfig, kmol: float) -> SourceConfig:
    """Set the ethylene inventory (kmol); total inventory is preserved."""
    return with_c2h4_fraction(source, kmol / source.inventory_kmol)


# ---------------------------------------------------------------------------
# Monitored process state
# ---------------------------------------------------------------------------

#: Dataset column order for the 25 monitored variables.
MONITORED_VARS = (
    "srcr1_p", "srcr1_t", "m2_pv", "k1_p1", "k1_p2",
    "m1_pv", "e2_tsi", "e2_tti", "r1_t2", "snk1_p",
    "snk1_t", "r1_tau", "r1_xmax", "snk1_z_c2h4o", "fc1_op",
    "xc1_op", "cw1_op", "fc1_sp", "xc1_sp", "k1_power",
    "e2_duty", "e2_tso", "r1_zin_c2h4", "r1_zout_o2", "srcr1_m",
)

#: Variables bounded to [0, 1] by their physical meaning.
FRACTION_VARS = frozenset({"r1_xmax", "snk1_z_c2h4o", "fc1_op", "xc1_op", "cw1_op", "r1_zin_c2h4", "r1_zout_o2"})
TEMPERATURE_VARS = frozenset({"srcr1_t", "m1_pv", "e2_tsi", "e2_tti", "r1_t2", "snk1_t", "e2_tso", "xc1_sp"})


@dataclass(frozen=True)
class ProcessState:
    """One snapshot of the 25 monitored variables (reported units)."""

    srcr1_p: float
    srcr1_t: float
    m2_pv: float
    k1_p1: float
    k1_p2: float
    m1_pv: float
    e2_tsi: float
    e2_tti: float
    r1_t2: float
    snk1_p: float
    snk1_t: float
    r1_tau: float
    r1_xmax: float
    snk1_z_c2h4o: float
    fc1_op: float
    xc1_op: float
    cw1_op: float
    fc1_sp: float
    xc1_sp: float
    k1_power: float
    e2_duty: float
    e2_tso: float
    r1_zin_c2h4: float
    r1_zout_o2: float
    srcr1_m: float

    def __post_init__(self) -> None:
        for name in TEMPERATURE_VARS:
            if getattr(self, name) <= -T_ZERO:
                raise FlowsheetError(f"{name} below absolute zero")
        for name in FRACTION_VARS:
            v = getattr(self, name)
            if not (-1e-9 <= v <= 1.0 + 1e-9):
                raise FlowsheetError(f"{name}={v} outside [0, 1]")
        if self.m2_pv < 0:
            raise FlowsheetError("measured flow negative")

    def as_row(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in MONITORED_VARS)

    @classmethod
    def from_row(cls, row: Sequence[float]) -> "ProcessState":
        return cls(**dict(zip(MONITORED_VARS, row)))


@dataclass(frozen=True)
class Diagnostics:
    """Internal quantities backing one ProcessState, for balance checks."""

    y: tuple[float, ...]
    n_source: float  # mol/s drawn from the source
    n_leak: float
    n_reactor_in: float
    n_reactor_out: float
    z_in: tuple[float, ...]
    x_out: tuple[float, ...]
    rates: dict[str, float]
    duty_w: float
    power_w: float
    m_cw: float
    t_source: float
    t_comp_out: float
    t_hx_out: float
    t_reactor: float
    residual: float


@dataclass(frozen=True)
class SteadyState:
    state: ProcessState
    diagnostics: Diagnostics


@dataclass(frozen=True)
class Trajectory:
    times: tuple[float, ...]
    states: tuple[ProcessState, ...]

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise FlowsheetError("trajectory timestamps must be strictly increasing")


@dataclass(frozen=True)
class Unsolved:
    reason: str
    last_state: ProcessState | None = None


SimulationOutcome = Union[SteadyState, Trajectory, Unsolved]


# ---------------------------------------------------------------------------
# State vector layout
# ---------------------------------------------------------------------------
# y[0:5]  reactor mole fractions (c2h4, o2, c2h4o, co2, h2o); inert derived
# y[5]    reactor temperature, K
# y[6]    measured HX outlet temperature, K (first-order lag)
# y[7]    flow-control valve position
# y[8]    temperature-control valve position
# y[9]    flow-controller integral
# y[10]   temperature-controller integral
# y[11]   compressor discharge temperature as seen by the HX, K (lag)

N_STATES = 12
IDX_T_RX = 5
IDX_T_M1 = 6
IDX_FC_OP = 7
IDX_XC_OP = 8
IDX_FC_INT = 9
IDX_XC_INT = 10
IDX_T_K1 = 11

_STATE_SCALE = np.array([1, 1, 1, 1, 1, 100.0, 100.0, 1, 1, 100.0, 1000.0, 100.0])


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def _integral_bound(gains: PiGains) -> float:
    return WINDUP_SPAN / gains.ki if gains.ki > 0 else 0.0


@dataclass(frozen=True)
class _Derived:
    """Per-config constants precomputed off the hot path."""

    mw_in: float
    cp_in: float
    cp_mass: float
    t_src: float
    rho_src: float
    lam_b: float
    lam_a: float
    valve_k2: float  # Cv^2 * rho * 1e5 (multiply by op^2)
    kappa: float
    t_cw_in: float
    cw_flow_full: float  # cooling-water flow at both valves fully open
    ua_w: float
    sp_xc_k: float
    fc_bound: float
    xc_bound: float
    z5: tuple[float, ...]
    reactions: tuple[tuple[float, float, float, tuple[int, ...], tuple[float, ...], float], ...]
    # per reaction: (k0, ea, -dh, reactant indices, stoich over 5 tracked species, dn_tot)


@lru_cache(maxsize=128)
def _derive(cfg: FlowsheetConfig) -> _Derived:
    src, hx = cfg.source, cfg.heat_exchanger
    mw_in = mixture_mw(src.z)
    cp_in = mixture_cp(src.z)
    t_src = src.temperature + T_ZERO
    rho_src = src.pressure * 1e5 * mw_in / (R_GAS * t_src)
    dp_cw = max(hx.cw_pressure - hx.cw_return_pressure, 0.0)
    reactions = []
    for rx in cfg.reactor.kinetics.reactions:
        idx = tuple(SPECIES.index(sp) for sp in rx.reactants)
        stoich5 = tuple(rx.stoich_map.get(sp, 0.0) for sp in SPECIES[:5])
        reactions.append(
            (rx.k0, rx.activation_energy, -rx.heat_of_reaction, idx, stoich5, rx.mole_change)
        )
    return _Derived(
        mw_in=mw_in,
        cp_in=cp_in,
        cp_mass=cp_in / mw_in,
        t_src=t_src,
        rho_src=rho_src,
        lam_b=cfg.leak.fraction if cfg.leak.location == LEAK_BEFORE_COMPRESSOR else 0.0,
        lam_a=cfg.leak.fraction if cfg.leak.location == LEAK_AFTER_COMPRESSOR else 0.0,
        valve_k2=cfg.flow_controller.valve_coeff**2 * rho_src * 1e5,
        kappa=R_GAS / cp_in,
        t_cw_in=hx.cw_inlet_temp + T_ZERO,
        cw_flow_full=hx.cw_valve_coeff * hx.outlet_valve_pos * math.sqrt(1000.0 * dp_cw * 1e5),
        ua_w=hx.ua * 1000.0,
        sp_xc_k=hx.tc_setpoint + T_ZERO,
        fc_bound=_integral_bound(cfg.flow_controller.gains),
        xc_bound=_integral_bound(hx.tc_gains),
        z5=src.z[:5],
        reactions=tuple(reactions),
    )


class _Network:
    """Quasi-static algebra evaluated at one dynamic state."""

    __slots__ = (
        "mw_in", "cp_in", "cp_mass", "t_src", "m_valve", "m_comp",
        "m_hx", "k1_p1", "k1_p2", "t_comp_out", "power_w", "n_in", "m_cw", "duty_w",
        "t_hx_out_ss", "t_cw_out", "fc_err", "fc_cmd", "xc_err", "xc_cmd",
    )

    def __init__(self, cfg: FlowsheetConfig, y, d: _Derived | None = None) -> None:
        if d is None:
            d = _derive(cfg)
        self.mw_in, self.cp_in, self.cp_mass, self.t_src = d.mw_in, d.cp_in, d.cp_mass, d.t_src

        # Valve + compressor suction: m = Cv*op*sqrt(rho*dP), m(1-lam) = g*k1_p1.
        op_fc = float(y[IDX_FC_OP])
        g = cfg.compressor.suction_coeff
        k2 = d.valve_k2 * op_fc * op_fc
        if k2 > 0:
            beta = k2 * (1.0 - d.lam_b) / g
            gamma = k2 * cfg.source.pressure
            self.m_valve = (-beta + math.sqrt(beta * beta + 4.0 * gamma)) / 2.0
        else:
            self.m_valve = 0.0
        self.m_comp = self.m_valve * (1.0 - d.lam_b)
        self.k1_p1 = self.m_comp / g
        self.m_hx = self.m_comp * (1.0 - d.lam_a)

        snk = cfg.sink
        self.k1_p2 = snk.pressure + snk.line_drop + snk.line_resistance * self.m_hx * self.m_hx

        pr = self.k1_p2 / self.k1_p1 if self.k1_p1 > 1e-9 else 1e9
        self.t_comp_out = self.t_src * (1.0 + (pr**d.kappa - 1.0) / cfg.compressor.efficiency)
        self.power_w = self.m_comp * self.cp_mass * (self.t_comp_out - self.t_src)
        self.n_in = self.m_hx / self.mw_in

        t_hot_in = float(y[IDX_T_K1])
        op_xc = float(y[IDX_XC_OP])
        self.m_cw = d.cw_flow_full * op_xc
        c_hot = self.m_hx * self.cp_mass
        c_cold = self.m_cw * CP_WATER
        if c_hot < 1e-9 or c_cold < 1e-9:
            self.duty_w = 0.0
            self.t_hx_out_ss = t_hot_in
            self.t_cw_out = d.t_cw_in
        else:
            if c_hot <= c_cold:
                c_min, cr = c_hot, c_hot / c_cold
            else:
                c_min, cr = c_cold, c_cold / c_hot
            ntu = d.ua_w / c_min
            if cr > 1.0 - 1e-9:
                eff = ntu / (1.0 + ntu)
            else:
                ex = math.exp(-ntu * (1.0 - cr))
                eff = (1.0 - ex) / (1.0 - cr * ex)
            self.duty_w = eff * c_min * (t_hot_in - d.t_cw_in)
            self.t_hx_out_ss = t_hot_in - self.duty_w / c_hot
            self.t_cw_out = d.t_cw_in + self.duty_w / c_cold

        fc, hx = cfg.flow_controller, cfg.heat_exchanger
        if fc.fixed_op is not None:
            self.fc_err, self.fc_cmd = 0.0, fc.fixed_op
        else:
            g_fc = fc.gains
            e = g_fc.setpoint_error(fc.setpoint, self.m_valve)
            self.fc_err = e
            self.fc_cmd = _clamp01(g_fc.bias + g_fc.kp * e + g_fc.ki * float(y[IDX_FC_INT]))
        if hx.tc_fixed_op is not None:
            self.xc_err, self.xc_cmd = 0.0, hx.tc_fixed_op
        else:
            g_xc = hx.tc_gains
            e = g_xc.setpoint_error(d.sp_xc_k, float(y[IDX_T_M1]))
            self.xc_err = e
            self.xc_cmd = _clamp01(g_xc.bias + g_xc.kp * e + g_xc.ki * float(y[IDX_XC_INT]))


def _reactor_terms(cfg: FlowsheetConfig, y, net: _Network, d: _Derived | None = None):
    """Species/energy balance pieces at the current reactor state."""
    if d is None:
        d = _derive(cfg)
    x = [max(float(y[0]), 0.0), max(float(y[1]), 0.0), max(float(y[2]), 0.0),
         max(float(y[3]), 0.0), max(float(y[4]), 0.0)]
    x_inert = max(1.0 - (x[0] + x[1] + x[2] + x[3] + x[4]), 0.0)
    t = float(y[IDX_T_RX])
    if t <= 0:
        raise FlowsheetError(f"reactor temperature {t} K non-physical")
    c_tot = net.k1_p2 * 1e5 / (R_GAS * t)
    conc6 = (x[0] * c_tot, x[1] * c_tot, x[2] * c_tot, x[3] * c_tot, x[4] * c_tot, x_inert * c_tot)
    rt_inv = 1.0 / (R_GAS * t)
    rates: list[float] = []
    gen = [0.0, 0.0, 0.0, 0.0, 0.0]
    dn_tot = 0.0
    qdot = 0.0
    for k0, ea, heat, ridx, stoich5, dn in d.reactions:
        r = k0 * math.exp(-ea * rt_inv)
        for i in ridx:
            r *= conc6[i]
        rates.append(r)
        qdot += r * heat
        dn_tot += r * dn
        for i in range(5):
            s = stoich5[i]
            if s:
                gen[i] += r * s
    n_rx = c_tot * cfg.reactor.volume
    return x, x_inert, rates, gen, dn_tot, qdot, n_rx


def rhs(cfg: FlowsheetConfig, y, d: _Derived | None = None) -> np.ndarray:
    """Time derivatives of the dynamic state."""
    return np.array(_rhs_list(cfg, y, d))


def _rhs_list(cfg: FlowsheetConfig, y, d: _Derived | None = None) -> list[float]:
    if d is None:
        d = _derive(cfg)
    net = _Network(cfg, y, d)
    x, x_inert, rates, gen, dn_tot, qdot, n_rx = _reactor_terms(cfg, y, net, d)
    rc = cfg.reactor
    v = rc.volume
    n_in = net.n_in
    z_in = d.z5
    t_rx = float(y[IDX_T_RX])
    t_m1 = float(y[IDX_T_M1])
    inv_n = 1.0 / n_rx
    cp_rx = (
        x[0] * CP["c2h4"] + x[1] * CP["o2"] + x[2] * CP["c2h4o"]
        + x[3] * CP["co2"] + x[4] * CP["h2o"] + x_inert * CP["n2"]
    )
    heat_cap = n_rx * cp_rx + rc.wall_heat_capacity

    fc, hx = cfg.flow_controller, cfg.heat_exchanger
    d_fc_int = 0.0
    if fc.gains.ki > 0 and fc.fixed_op is None:
        i_val = float(y[IDX_FC_INT])
        if not ((i_val >= d.fc_bound and net.fc_err > 0) or (i_val <= -d.fc_bound and net.fc_err < 0)):
            d_fc_int = net.fc_err
    d_xc_int = 0.0
    if hx.tc_gains.ki > 0 and hx.tc_fixed_op is None:
        i_val = float(y[IDX_XC_INT])
        if not ((i_val >= d.xc_bound and net.xc_err > 0) or (i_val <= -d.xc_bound and net.xc_err < 0)):
            d_xc_int = net.xc_err

    return [
        (n_in * (z_in[0] - x[0]) + v * (gen[0] - x[0] * dn_tot)) * inv_n,
        (n_in * (z_in[1] - x[1]) + v * (gen[1] - x[1] * dn_tot)) * inv_n,
        (n_in * (z_in[2] - x[2]) + v * (gen[2] - x[2] * dn_tot)) * inv_n,
        (n_in * (z_in[3] - x[3]) + v * (gen[3] - x[3] * dn_tot)) * inv_n,
        (n_in * (z_in[4] - x[4]) + v * (gen[4] - x[4] * dn_tot)) * inv_n,
        (n_in * d.cp_in * (t_m1 - t_rx) + v * qdot) / heat_cap,
        (net.t_hx_out_ss - t_m1) / HX_LAG_TAU,
        (net.fc_cmd - float(y[IDX_FC_OP])) / ACTUATOR_TAU,
        (net.xc_cmd - float(y[IDX_XC_OP])) / ACTUATOR_TAU,
        d_fc_int,
        d_xc_int,
        (net.t_comp_out - float(y[IDX_T_K1])) / K1_LAG_TAU,
    ]


# ---------------------------------------------------------------------------
# Observation
# ---------------------------------------------------------------------------

def observe(cfg: FlowsheetConfig, y: np.ndarray) -> tuple[ProcessState, Diagnostics]:
    net = _Network(cfg, y)
    x, x_inert, rates, gen, dn_tot, qdot, n_rx = _reactor_terms(cfg, y, net)
    rc = cfg.reactor
    t_rx = float(y[IDX_T_RX])
    n_out = net.n_in + rc.volume * dn_tot
    z_e = cfg.source.z[0]
    conversion = 0.0
    if z_e > 1e-12 and net.n_in > 1e-12:
        conversion = (net.n_in * z_e - n_out * x[0]) / (net.n_in * z_e)
        conversion = min(max(conversion, 0.0), 1.0)
    q_vol = net.n_in * R_GAS * t_rx / (net.k1_p2 * 1e5) if net.n_in > 1e-12 else float("nan")
    tau = rc.volume / q_vol if q_vol and q_vol > 0 else float("inf")
    residual = float(np.max(np.abs(rhs(cfg, y) / _STATE_SCALE)))
    state = ProcessState(
        srcr1_p=cfg.source.pressure,
        srcr1_t=cfg.source.temperature,
        m2_pv=net.m_valve,
        k1_p1=net.k1_p1,
        k1_p2=net.k1_p2,
        m1_pv=float(y[IDX_T_M1]) - T_ZERO,
        e2_tsi=cfg.heat_exchanger.cw_inlet_temp,
        e2_tti=float(y[IDX_T_K1]) - T_ZERO,
        r1_t2=t_rx - T_ZERO,
        snk1_p=cfg.sink.pressure,
        snk1_t=t_rx - T_ZERO - 1.0,
        r1_tau=tau,
        r1_xmax=conversion,
        snk1_z_c2h4o=x[2],
        fc1_op=float(y[IDX_FC_OP]),
        xc1_op=float(y[IDX_XC_OP]),
        cw1_op=cfg.heat_exchanger.outlet_valve_pos,
        fc1_sp=cfg.flow_controller.setpoint,
        xc1_sp=cfg.heat_exchanger.tc_setpoint,
        k1_power=net.power_w / 1000.0,
        e2_duty=net.duty_w / 1000.0,
        e2_tso=net.t_cw_out - T_ZERO,
        r1_zin_c2h4=cfg.source.z[0],
        r1_zout_o2=x[1],
        srcr1_m=cfg.source.inventory_kmol,
    )
    diag = Diagnostics(
        y=tuple(float(v) for v in y),
        n_source=net.m_valve / net.mw_in,
        n_leak=(net.m_valve - net.m_hx) / net.mw_in,
        n_reactor_in=net.n_in,
        n_reactor_out=n_out,
        z_in=cfg.source.z,
        x_out=(*x, x_inert),
        rates=rates,
        duty_w=net.duty_w,
        power_w=net.power_w,
        m_cw=net.m_cw,
        t_source=net.t_src,
        t_comp_out=float(y[IDX_T_K1]),
        t_hx_out=net.t_hx_out_ss,
        t_reactor=t_rx,
        residual=residual,
    )
    return state, diag


# ---------------------------------------------------------------------------
# Static solve
# ---------------------------------------------------------------------------

def _bisect(f, lo: float, hi: float, iters: int = 80) -> float:
    flo = f(lo)
    if flo == 0.0:
        return lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0) == (flo > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _static_fc(cfg: FlowsheetConfig) -> tuple[float, float]:
    """Steady (valve position, integral) of the flow loop."""
    fc = cfg.flow_controller

    def flow_at(op: float) -> float:
        y = np.zeros(N_STATES)
        y[IDX_FC_OP] = op
        return _Network(cfg, y).m_valve

    if fc.fixed_op is not None:
        return fc.fixed_op, 0.0
    if fc.gains.ki > 0:
        # integral action drives flow to the setpoint when reachable
        if flow_at(1.0) <= fc.setpoint:
            return 1.0, _integral_bound(fc.gains)
        if flow_at(0.0) >= fc.setpoint:
            return 0.0, -_integral_bound(fc.gains)
        op = _bisect(lambda o: fc.setpoint - flow_at(o), 0.0, 1.0)
        return op, (op - fc.gains.bias) / fc.gains.ki
    # proportional-only: op = clamp01(bias + kp (sp - m(op))), g monotone in op
    g = lambda op: op - _clamp01(fc.gains.bias + fc.gains.kp * (fc.setpoint - flow_at(op)))
    op = _bisect(g, 0.0, 1.0)
    return op, 0.0


def _static_xc(cfg: FlowsheetConfig, y_base: np.ndarray) -> tuple[float, float, float]:
    """Steady (valve position, integral, HX outlet temperature K)."""
    hx = cfg.heat_exchanger

    def hx_out(op: float) -> float:
        y = y_base.copy()
        y[IDX_XC_OP] = op
        return _Network(cfg, y).t_hx_out_ss

    if hx.tc_fixed_op is not None:
        op = hx.tc_fixed_op
        return op, 0.0, hx_out(op)
    sp_k = hx.tc_setpoint + T_ZERO
    gains = hx.tc_gains
    if gains.ki > 0:
        t_min, t_max = hx_out(1.0), hx_out(0.0)
        if t_max <= sp_k:  # even zero cooling leaves the stream too cold
            return 0.0, -_integral_bound(gains), t_max
        if t_min >= sp_k:  # full cooling cannot reach the setpoint
            return 1.0, _integral_bound(gains), t_min
        op = _bisect(lambda o: hx_out(o) - sp_k, 0.0, 1.0)
        return op, (op - gains.bias) / gains.ki, sp_k
    g = lambda op: op - _clamp01(gains.bias + gains.kp * (hx_out(op) - sp_k))
    op = _bisect(g, 0.0, 1.0)
    return op, 0.0, hx_out(op)


def _reactor_guess(cfg: FlowsheetConfig, t_in: float) -> np.ndarray:
    """Start Newton on the cool side of the operating branch: feed composition
    with a modest temperature rise, so continuation lands on the low branch."""
    return np.array([*cfg.source.z[:5], t_in + 25.0])


def _solve_reactor(cfg: FlowsheetConfig, y_base: np.ndarray, guess: np.ndarray) -> np.ndarray | None:
    """Damped Newton on the reactor species/energy balances; returns the
    6-vector (x5, T) or None."""

    def residual(v: np.ndarray) -> np.ndarray:
        y = y_base.copy()
        y[:5] = v[:5]
        y[IDX_T_RX] = v[5]
        d = rhs(cfg, y)
        return np.array([*d[:5], d[IDX_T_RX] / 10.0])

    v = guess.copy()
    for _ in range(80):
        f = residual(v)
        fn = float(np.max(np.abs(f)))
        if fn < 1e-13:
            return v
        jac = np.zeros((6, 6))
        for j in range(6):
            h = 1e-7 * max(abs(v[j]), 1e-3 if j < 5 else 1.0)
            vp = v.copy()
            vp[j] += h
            jac[:, j] = (residual(vp) - f) / h
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError:
            return None
        alpha = 1.0
        for _ in range(40):
            v_new = v + alpha * step
            v_new[:5] = np.clip(v_new[:5], 0.0, 1.0)
            v_new[5] = min(max(v_new[5], 200.0), 3000.0)
            if float(np.max(np.abs(residual(v_new)))) < fn * (1.0 - 1e-4 * alpha) + 1e-16:
                v = v_new
                break
            alpha *= 0.5
        else:
            return None
    return None


def _integrate_reactor(cfg: FlowsheetConfig, y_base: np.ndarray, v0: np.ndarray, horizon: float) -> tuple[np.ndarray, bool]:
    """Relax the reactor sub-system toward steady state by time integration.

    Returns (state, capped); ``capped`` marks a thermal runaway past the cap.
    """
    y = y_base.copy()
    y[:5] = v0[:5]
    y[IDX_T_RX] = v0[5]
    steps = int(horizon / DT)
    d = _derive(cfg)
    for _ in range(steps):
        y = _rk4_step(cfg, y, DT, frozen_slow=True, d=d)
        if y[IDX_T_RX] > T_RUNAWAY_CAP:
            return np.array([*y[:5], y[IDX_T_RX]]), True
    return np.array([*y[:5], y[IDX_T_RX]]), False


def solve_static(config: FlowsheetConfig) -> SimulationOutcome:
    """Steady state of the flowsheet, or Unsolved.

    The flow loop, compressor discharge and temperature loop close in flow
    order without recycle, so each is solved by monotone bisection; the
    reactor balances take a damped Newton with a time-integration fallback
    (continuation from the nominal operating branch).
    """
    try:
        y = np.zeros(N_STATES)
        y[IDX_FC_OP], y[IDX_FC_INT] = _static_fc(config)
        y[IDX_T_K1] = _Network(config, y).t_comp_out
        y[IDX_XC_OP], y[IDX_XC_INT], t_hx = _static_xc(config, y)
        y[IDX_T_M1] = t_hx
        guess = _reactor_guess(config, t_hx)
        v = _solve_reactor(config, y, guess)
        if v is None:
            relaxed, capped = _integrate_reactor(config, y, guess, horizon=400.0)
            if capped:
                return Unsolved("thermal runaway: no steady state below temperature cap")
            v = _solve_reactor(config, y, relaxed)
        if v is None:
            return Unsolved("reactor balances did not converge")
        y[:5] = v[:5]
        y[IDX_T_RX] = v[5]
        if y[IDX_T_RX] > T_RUNAWAY_CAP:
            state, _ = observe(config, y)
            return Unsolved("thermal runaway: no steady state below temperature cap", state)
        state, diag = observe(config, y)
        if diag.residual > 1e-8:
            return Unsolved(f"stationarity residual {diag.residual:.2e} above tolerance", state)
        return SteadyState(state, diag)
    except (FlowsheetError, FloatingPointError, OverflowError, ValueError) as exc:
        return Unsolved(f"non-physical state: {exc}")


# ---------------------------------------------------------------------------
# Dynamic simulation
# ---------------------------------------------------------------------------

def _rk4_step(cfg: FlowsheetConfig, y, dt: float, frozen_slow: bool = False, d: _Derived | None = None) -> np.ndarray:
    """One RK4 step; ``frozen_slow`` holds everything but the reactor states
    (used only by the static solver's relaxation fallback)."""
    if d is None:
        d = _derive(cfg)
    yl = [float(v) for v in y]
    out = _rk4_list(cfg, yl, dt, d)
    if frozen_slow:
        keep = list(yl)
        for i in (*range(5), IDX_T_RX):
            keep[i] = out[i]
        out = keep
    return np.array(out)


def _rk4_list(cfg: FlowsheetConfig, y: list[float], dt: float, d: _Derived) -> list[float]:
    h2, h6 = dt / 2.0, dt / 6.0
    k1 = _rhs_list(cfg, y, d)
    k2 = _rhs_list(cfg, [a + h2 * b for a, b in zip(y, k1)], d)
    k3 = _rhs_list(cfg, [a + h2 * b for a, b in zip(y, k2)], d)
    k4 = _rhs_list(cfg, [a + dt * b for a, b in zip(y, k3)], d)
    out = [a + h6 * (b + 2.0 * (c + e) + f) for a, b, c, e, f in zip(y, k1, k2, k3, k4)]
    fc_b, xc_b = d.fc_bound, d.xc_bound
    out[IDX_FC_INT] = min(max(out[IDX_FC_INT], -fc_b), fc_b)
    out[IDX_XC_INT] = min(max(out[IDX_XC_INT], -xc_b), xc_b)
    return out


def simulate_dynamic(
    base_config: FlowsheetConfig,
    config: FlowsheetConfig,
    timepoints: Sequence[float],
    noise_seed: int | None = None,
    noise_sigma: float = 0.005,
    pinned: frozenset[str] = frozenset(),
) -> SimulationOutcome:
    """Integrate the perturbed flowsheet from the base steady state.

    Records the pre-perturbation state at t = 0 plus one state per requested
    timepoint.  Gaussian measurement noise (sigma as a fraction of each
    variable's nominal value) is applied to reported values of variables not
    named in ``pinned``; the integrated state itself is never noised.
    """
    if not timepoints or any(t <= 0 for t in timepoints):
        raise FlowsheetError("timepoints must be strictly positive")
    if any(b <= a for a, b in zip(timepoints, list(timepoints)[1:])):
        raise FlowsheetError("timepoints must be strictly increasing")

    base = solve_static(base_config)
    if isinstance(base, Unsolved):
        return Unsolved(f"base configuration unsolved: {base.reason}", base.last_state)
    nominal = base.state
    y = np.array(base.diagnostics.y)

    rng = np.random.default_rng(noise_seed) if noise_seed is not None else None

    def report(state: ProcessState) -> ProcessState:
        if rng is None or noise_sigma <= 0:
            return state
        row = list(state.as_row())
        for i, name in enumerate(MONITORED_VARS):
            scale = abs(getattr(nominal, name))
            noise = rng.normal(0.0, noise_sigma * scale)
            if name in pinned:
                continue
            row[i] += noise
            if name in FRACTION_VARS:
                row[i] = min(max(row[i], 0.0), 1.0)
        return ProcessState.from_row(row)

    times = [0.0]
    states = [report(nominal)]
    step_targets = []
    for t in timepoints:
        n = round(t / DT)
        if n < 1:
            raise FlowsheetError(f"timepoint {t} below integrator step {DT}")
        step_targets.append((n, t))

    n_total = step_targets[-1][0]
    targets = dict(step_targets)
    last_state = nominal
    d = _derive(config)
    yl = [float(v) for v in y]
    scale = [float(s) for s in _STATE_SCALE]
    for step in range(1, n_total + 1):
        y_full = _rk4_list(config, yl, DT, d)
        y_half = _rk4_list(config, _rk4_list(config, yl, DT / 2.0, d), DT / 2.0, d)
        err = max(abs(a - b) / s for a, b, s in zip(y_full, y_half, scale))
        yl = y_half
        if not all(math.isfinite(v) for v in yl) or err > 1e-2:
            return Unsolved("integration diverged", last_state)
        if yl[IDX_T_RX] > T_RUNAWAY_CAP:
            state, _ = observe(config, yl)
            return Unsolved("thermal runaway beyond temperature cap", state)
        if step in targets:
            try:
                state, _ = observe(config, yl)
            except FlowsheetError as exc:
                return Unsolved(f"non-physical state: {exc}", last_state)
            last_state = state
            times.append(targets[step])
            states.append(report(state))
    return Trajectory(tuple(times), tuple(states))


# ---------------------------------------------------------------------------
# Discrete controller step (standalone PI with anti-windup)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControllerState:
    integral: float = 0.0


def controller_step(
    gains: PiGains, state: ControllerState, setpoint: float, measurement: float, dt: float
) -> tuple[ControllerState, float]:
    """One discrete PI update; output clamped to [0, 1], integral anti-windup."""
    if dt <= 0:
        raise FlowsheetError("dt must be positive")
    e = (measurement - setpoint) if gains.direct else (setpoint - measurement)
    integral = state.integral + e * dt
    if gains.ki > 0:
        bound = _integral_bound(gains)
        integral = min(max(integral, -bound), bound)
    else:
        integral = 0.0
    out = _clamp01(gains.bias + gains.kp * e + gains.ki * integral)
    return ControllerState(integral), out
