"""Fermionic functional algebra on finite mode bases."""

from moller_workbench.funcalg.functional import (
    FermionicFunctional,
    HbarSeries,
    derivative,
    evaluate,
    functional_involution,
    wedge,
)
from moller_workbench.funcalg.modes import ModeBasis, ModePair, build_mode_basis, charged_partner
from moller_workbench.funcalg.products import (
    algebra_moller,
    algebra_moller_inverse,
    peierls,
    star,
    star_series,
)

__all__ = [
    "FermionicFunctional",
    "HbarSeries",
    "ModeBasis",
    "ModePair",
    "algebra_moller",
    "algebra_moller_inverse",
    "build_mode_basis",
    "charged_partner",
    "derivative",
    "evaluate",
    "functional_involution",
    "peierls",
    "star",
    "star_series",
    "wedge",
]
