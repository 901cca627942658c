"""Reaction kinetics for the ethylene-oxidation reactor model.

Three gas-phase reactions over a supported catalyst bed, lumped to
pseudo-homogeneous rates:

    main   2 C2H4 + O2     -> 2 C2H4O          (partial oxidation)
    side1  C2H4  + 3 O2    -> 2 CO2 + 2 H2O    (ethylene combustion)
    side2  C2H4O + 5/2 O2  -> 2 CO2 + 2 H2O    (product combustion)

Each extent rate is Arrhenius in temperature and first order in each
participating reactant.  The combustion channels carry higher activation
energies, so they take over at elevated temperature; that is what produces
thermal runaway when cooling is lost.

The numeric constants are desk-scale calibration values, chosen so that the
nominal operating point converts roughly half the ethylene feed and a total
loss of cooling water drives the reactor past its temperature cap.  They are
not measured data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

R_GAS = 8.314462618  # J/(mol K)

SPECIES = ("c2h4", "o2", "c2h4o", "co2", "h2o", "n2")

#: Molar masses, kg/mol.
MW = {"c2h4": 0.02805, "o2": 0.032, "c2h4o": 0.04405, "co2": 0.04401, "h2o": 0.01802, "n2": 0.02801}

#: Ideal-gas molar heat capacities, J/(mol K), treated as constant.
CP = {"c2h4": 43.6, "o2": 29.4, "c2h4o": 48.0, "co2": 37.1, "h2o": 33.6, "n2": 29.1}

CP_WATER = 4186.0  # J/(kg K), liquid cooling water


class KineticsError(ValueError):
    pass


@dataclass(frozen=True)
class Reaction:
    """One reaction channel: extent rate = k0 exp(-Ea/RT) * prod(reactant conc)."""

    name: str
    k0: float
    activation_energy: float  # J/mol
    heat_of_reaction: float  # J/mol extent, negative = exothermic
    stoichiometry: tuple[tuple[str, float], ...]  # (species, mol per extent), negative = consumed
    reactants: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.heat_of_reaction >= 0:
            raise KineticsError(f"{self.name}: oxidation steps must be exothermic")
        for sp in self.reactants:
            if self.stoich_map.get(sp, 0) >= 0:
                raise KineticsError(f"{self.name}: reactant {sp} must be consumed")

    @property
    def stoich_map(self) -> dict[str, float]:
        return dict(self.stoichiometry)

    @property
    def mole_change(self) -> float:
        return sum(c for _, c in self.stoichiometry)

    def rate(self, temperature: float, conc: dict[str, float]) -> float:
        """Extent rate in mol/(m^3 s); zero when any reactant is depleted."""
        k = self.k0 * math.exp(-self.activation_energy / (R_GAS * temperature))
        for sp in self.reactants:
            k *= max(conc.get(sp, 0.0), 0.0)
        return k


@dataclass(frozen=True)
class KineticsParams:
    main: Reaction
    side1: Reaction
    side2: Reaction

    def __post_init__(self) -> None:
        want = {"c2h4": -2.0, "o2": -1.0, "c2h4o": 2.0}
        if {k: v for k, v in self.main.stoich_map.items() if v} != want:
            raise KineticsError("main reaction must be 2 C2H4 + O2 -> 2 C2H4O")

    @property
    def reactions(self) -> tuple[Reaction, Reaction, Reaction]:
        return (self.main, self.side1, self.side2)


def default_kinetics() -> KineticsParams:
    # The low main-channel activation energy keeps the nominal operating
    # branch Semenov-stable at ~32% conversion; the steep combustion channels
    # ignite once the feed arrives uncooled and push the reactor past its cap.
    return KineticsParams(
        main=Reaction(
            "main",
            k0=0.245,
            activation_energy=2.5e4,
            heat_of_reaction=-2.10e5,  # per extent = per 2 mol C2H4O
            stoichiometry=(("c2h4", -2.0), ("o2", -1.0), ("c2h4o", 2.0)),
            reactants=("c2h4", "o2"),
        ),
        side1=Reaction(
            "side1",
            k0=1.4e7,
            activation_energy=1.10e5,
            heat_of_reaction=-1.323e6,
            stoichiometry=(("c2h4", -1.0), ("o2", -3.0), ("co2", 2.0), ("h2o", 2.0)),
            reactants=("c2h4", "o2"),
        ),
        side2=Reaction(
            "side2",
            k0=7.0e6,
            activation_energy=1.12e5,
            heat_of_reaction=-1.306e6,
            stoichiometry=(("c2h4o", -1.0), ("o2", -2.5), ("co2", 2.0), ("h2o", 2.0)),
            reactants=("c2h4o", "o2"),
        ),
    )


def reaction_rates(temperature: float, conc: dict[str, float], kin: KineticsParams) -> dict[str, float]:
    """Extent rates (mol/(m^3 s)) per reaction at one reactor state."""
    if temperature <= 0:
        raise KineticsError(f"absolute temperature must be positive, got {temperature}")
    if any(c < -1e-12 for c in conc.values()):
        raise KineticsError("concentrations must be non-negative")
    return {rx.name: rx.rate(temperature, conc) for rx in kin.reactions}


def mixture_cp(z: tuple[float, ...]) -> float:
    """Molar heat capacity of a composition vector over SPECIES, J/(mol K)."""
    return sum(zi * CP[sp] for zi, sp in zip(z, SPECIES))


def mixture_mw(z: tuple[float, ...]) -> float:
    """Molar mass of a composition vector over SPECIES, kg/mol."""
    return sum(zi * MW[sp] for zi, sp in zip(z, SPECIES))
