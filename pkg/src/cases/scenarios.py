import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src.boundary.ghosts import BoundaryKind, BoundarySpec, fill_ghosts, fill_scalar_ghosts
from src.core.eos import potential_temperature
from src.core.errors import ConfigurationError
from src.core.grid import Grid
from src.core.hydrostatic import HydrostaticState
from src.core.params import SimParams, WeightsMode
from src.core.state import ConservedField, PerturbationField, perturbation_extract

logger = logging.getLogger(__name__)

ScalarFn = Callable[..., np.ndarray]
VectorFn = Callable[..., Tuple[np.ndarray, ...]]

# Options every case accepts; per-case extras are listed in CASE_OPTIONS
COMMON_OVERRIDES = ("nx", "ny", "eps", "cfl", "t_end", "weights_mode")
CASE_OPTIONS = {
    "accuracy2d": ("p2_variant",),
    "isothermal": ("perturbed",),
}


@dataclass(frozen=True)
class ReferenceScales:
    """Reference values that make an atmospheric case dimensionless (SI units)."""
    p_ref: float
    rho_ref: float
    l_ref: float
    t_ref: float
    gas_constant: float = 287.058

    @property
    def u_ref(self) -> float:
        return self.l_ref / self.t_ref

    @property
    def theta_ref(self) -> float:
        return self.p_ref / (self.gas_constant * self.rho_ref)

    @property
    def eps(self) -> float:
        """Global Mach number U_ref / sqrt(p_ref / rho_ref)."""
        return self.u_ref / math.sqrt(self.p_ref / self.rho_ref)

    def gravity(self, g: float) -> float:
        """Dimensionless gravity so that grad p0 = -rho0 grad Phi holds in scaled units."""
        return g * self.l_ref * self.rho_ref / self.p_ref

    def length(self, value_m: float) -> float:
        return value_m / self.l_ref

    def to_dimensional_length(self, value):
        return value * self.l_ref

    def to_dimensional_time(self, value):
        return value * self.t_ref

    def to_dimensional_theta(self, value):
        """Kelvin from a dimensionless potential temperature (or a difference of two)."""
        return value * self.theta_ref


@dataclass
class InitialCondition:
    """
    Initial primitive fields as callables of node coordinates.

    ``theta2`` is optional; without it theta2 follows from (rho, p). ``rho2`` and
    ``p2`` supply the starting perturbations when the case knows them, which
    is required at eps = 0.
    """
    rho: ScalarFn
    velocity: VectorFn
    pressure: ScalarFn
    theta2: Optional[ScalarFn] = None
    rho2: Optional[ScalarFn] = None
    p2: Optional[ScalarFn] = None


@dataclass
class Scenario:
    """A benchmark case in dimensionless variables, ready to be run."""
    name: str
    grid: Grid
    params: SimParams
    t_end: float
    hydro: HydrostaticState
    initial: InitialCondition
    boundary: BoundarySpec
    steady: bool = False
    constants: Dict[str, Any] = field(default_factory=dict)
    scales: Optional[ReferenceScales] = None
    description: str = ""

    @property
    def has_exact_solution(self) -> bool:
        return self.steady


@dataclass(frozen=True)
class _Defaults:
    nx: int
    ny: Optional[int]
    eps: float
    cfl: float
    t_end: float
    gamma: float = 1.4
    weights_mode: WeightsMode = WeightsMode.NONLINEAR


def _ones(x: np.ndarray) -> np.ndarray:
    return np.ones_like(x, dtype=float)


def _zeros(x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x, dtype=float)


def _polytrope(xi: np.ndarray, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """(rho0, p0) of the isentropic background with theta0 = 1 under unit gravity along xi."""
    base = 1.0 - (gamma - 1.0) / gamma * xi
    return np.power(base, 1.0 / (gamma - 1.0)), np.power(base, gamma / (gamma - 1.0))


def _theta2_well_prepared(rho0, p0, rho2, p2, eps2, gamma):
    """theta2 = (rho0 theta0 p2 / (gamma p0) - rho2 theta0) / rho with theta0 = 1."""
    rho = rho0 + eps2 * rho2
    return (rho0 * p2 / (gamma * p0) - rho2) / rho


def _accuracy1d(d: _Defaults, opts: Dict[str, Any]) -> Scenario:
    gamma = d.gamma
    params = SimParams(eps=d.eps, gamma=gamma, cfl=d.cfl, weights_mode=d.weights_mode)
    eps2 = params.eps2

    def rho0(x):
        return _polytrope(x, gamma)[0]

    def p0(x):
        return _polytrope(x, gamma)[1]

    def rho2(x):
        return 1.0 + 0.2 * np.sin(np.pi * x)

    def p2(x):
        return 4.5 - x + 0.2 * np.cos(np.pi * x) / np.pi

    hydro = HydrostaticState(rho0=rho0, p0=p0, phi=lambda x: x, grad_phi=lambda x: (_ones(x),),
                             gamma=gamma, theta0=_ones, grad_p0=lambda x: (-rho0(x),))
    initial = InitialCondition(
        rho=lambda x: rho0(x) + eps2 * rho2(x),
        velocity=lambda x: (_zeros(x),),
        pressure=lambda x: p0(x) + eps2 * p2(x),
        theta2=lambda x: _theta2_well_prepared(rho0(x), p0(x), rho2(x), p2(x), eps2, gamma),
        rho2=rho2,
        p2=p2,
    )
    return Scenario(
        name="accuracy1d",
        grid=Grid(0.0, 2.0, d.nx),
        params=params,
        t_end=d.t_end,
        hydro=hydro,
        initial=initial,
        boundary=BoundarySpec.uniform(BoundaryKind.INFLOW, 1),
        steady=True,
        description="Steady well-prepared perturbation of a polytropic atmosphere under unit gravity",
    )


def _shocktube(d: _Defaults, opts: Dict[str, Any]) -> Scenario:
    gamma = d.gamma
    params = SimParams(eps=d.eps, gamma=gamma, cfl=d.cfl, weights_mode=d.weights_mode)
    left, right = (1.0, 0.0, 1.0), (0.125, 0.0, 0.1)

    def rho0(x):
        return _polytrope(x, gamma)[0]

    def p0(x):
        return _polytrope(x, gamma)[1]

    def pick(x, k):
        return np.where(x < 0.5, left[k], right[k]).astype(float)

    hydro = HydrostaticState(rho0=rho0, p0=p0, phi=lambda x: x, grad_phi=lambda x: (_ones(x),),
                             gamma=gamma, theta0=_ones, grad_p0=lambda x: (-rho0(x),))
    initial = InitialCondition(
        rho=lambda x: pick(x, 0),
        velocity=lambda x: (pick(x, 1),),
        pressure=lambda x: pick(x, 2),
    )
    boundary = BoundarySpec({"x-": BoundaryKind.INFLOW, "x+": BoundaryKind.OUTFLOW})
    return Scenario(
        name="shocktube",
        grid=Grid(0.0, 1.0, d.nx),
        params=params,
        t_end=d.t_end,
        hydro=hydro,
        initial=initial,
        boundary=boundary,
        constants={"left": left, "right": right, "interface": 0.5},
        description="Sod-type shock tube in a high Mach regime with linear gravity",
    )


def _accuracy2d(d: _Defaults, opts: Dict[str, Any]) -> Scenario:
    gamma = d.gamma
    params = SimParams(eps=d.eps, gamma=gamma, cfl=d.cfl, weights_mode=d.weights_mode)
    eps2 = params.eps2
    variant = opts.get("p2_variant", "symmetric")
    if variant not in ("symmetric", "printed"):
        raise ConfigurationError(f"p2_variant must be 'symmetric' or 'printed', got {variant!r}")
    u0 = 1.0

    def rho0(x, y):
        return _polytrope(x + y - 2.0, gamma)[0]

    def p0(x, y):
        return _polytrope(x + y - 2.0, gamma)[1]

    def rho2(x, y):
        return 1.0 + 0.2 * np.sin(np.pi * (x + y))

    def p2(x, y):
        linear = x + y if variant == "symmetric" else x
        return 4.5 - linear + 0.2 * np.cos(np.pi * (x + y)) / np.pi

    def grad_p0(x, y):
        g = -rho0(x, y)
        return g, g.copy()

    hydro = HydrostaticState(rho0=rho0, p0=p0, phi=lambda x, y: x + y,
                             grad_phi=lambda x, y: (_ones(x), _ones(y)),
                             gamma=gamma, theta0=lambda x, y: _ones(x), grad_p0=grad_p0)
    initial = InitialCondition(
        rho=lambda x, y: rho0(x, y) + eps2 * rho2(x, y),
        velocity=lambda x, y: (u0 * _ones(x), -u0 * _ones(y)),
        pressure=lambda x, y: p0(x, y) + eps2 * p2(x, y),
        theta2=lambda x, y: _theta2_well_prepared(rho0(x, y), p0(x, y), rho2(x, y), p2(x, y), eps2, gamma),
        rho2=rho2,
        p2=p2,
    )
    return Scenario(
        name="accuracy2d",
        grid=Grid(0.0, 2.0, d.nx, 0.0, 2.0, d.ny),
        params=params,
        t_end=d.t_end,
        hydro=hydro,
        initial=initial,
        boundary=BoundarySpec.uniform(BoundaryKind.INFLOW, 2),
        steady=True,
        constants={"u0": u0, "p2_variant": variant},
        description="Steady 2D perturbation advected perpendicular to diagonal gravity",
    )


def vortex_k(xi: np.ndarray) -> np.ndarray:
    """Radial density profile primitive of the traveling vortex."""
    return (2.0 * np.cos(xi) + 2.0 * xi * np.sin(xi) + np.cos(2.0 * xi) / 8.0
            + xi * np.sin(2.0 * xi) / 4.0 + 0.75 * xi * xi)


def _vortex(d: _Defaults, opts: Dict[str, Any]) -> Scenario:
    gamma = 2.0
    params = SimParams(eps=d.eps, gamma=gamma, cfl=d.cfl, weights_mode=d.weights_mode)
    eps = params.eps
    strength, omega, center = 8.0, 4.0 * np.pi, (0.5, 0.5)
    theta_const = 1.0 / math.sqrt(2.0)

    def phi(x, y):
        return np.exp(-5.0 * (x - 1.0) ** 2)

    def rho0(x, y):
        return 110.0 - phi(x, y)

    def p0(x, y):
        return 0.5 * rho0(x, y) ** 2

    def core(x, y):
        r = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2)
        return r, omega * r <= np.pi

    def rho(x, y):
        r, inside = core(x, y)
        bump = (eps * strength / omega) ** 2 * (vortex_k(omega * r) - vortex_k(np.pi))
        return rho0(x, y) + np.where(inside, bump, 0.0)

    def velocity(x, y):
        r, inside = core(x, y)
        swirl = np.where(inside, strength * (1.0 + np.cos(omega * r)), 0.0)
        return 2.0 + swirl * (center[1] - y), swirl * (x - center[0])

    hydro = HydrostaticState(
        rho0=rho0, p0=p0, phi=phi,
        grad_phi=lambda x, y: (-10.0 * (x - 1.0) * phi(x, y), _zeros(y)),
        gamma=gamma,
        theta0=lambda x, y: np.full_like(x, theta_const, dtype=float),
        grad_p0=lambda x, y: (10.0 * (x - 1.0) * phi(x, y) * rho0(x, y), _zeros(y)),
    )
    initial = InitialCondition(
        rho=rho,
        velocity=velocity,
        pressure=lambda x, y: 0.5 * rho(x, y) ** 2,
        theta2=lambda x, y: _zeros(x),
    )
    return Scenario(
        name="vortex",
        grid=Grid(0.0, 2.0, d.nx, 0.0, 1.0, d.ny),
        params=params,
        t_end=d.t_end,
        hydro=hydro,
        initial=initial,
        boundary=BoundarySpec.uniform(BoundaryKind.PERIODIC, 2),
        constants={"Gamma": strength, "omega": omega, "center": center, "advection_speed": 2.0,
                   "c_p": 2.0, "c_v": 1.0},
        description="Shallow-water-equivalent traveling vortex over a Gaussian potential",
    )


def _isothermal(d: _Defaults, opts: Dict[str, Any]) -> Scenario:
    gamma = d.gamma
    params = SimParams(eps=d.eps, gamma=gamma, cfl=d.cfl, weights_mode=d.weights_mode)
    eps2 = params.eps2
    perturbed = bool(opts.get("perturbed", False))
    rho_bar, p_bar, g = 1.21, 1.0, 1.0
    k = rho_bar * g / p_bar
    amplitude, hump = 1.0 / 810.0, (0.3, 0.3)

    def profile(x, y):
        return np.exp(-k * (x + y))

    def rho0(x, y):
        return rho_bar * profile(x, y)

    def p0(x, y):
        return p_bar * profile(x, y)

    def theta0(x, y):
        return potential_temperature(rho0(x, y), p0(x, y), gamma)

    def grad_theta0(x, y):
        slope = k * (1.0 - 1.0 / gamma) * theta0(x, y)
        return slope, slope.copy()

    def grad_p0(x, y):
        v = -k * p0(x, y)
        return v, v.copy()

    def p2(x, y):
        if not perturbed:
            return _zeros(x)
        return amplitude * np.exp(-100.0 * k * ((x - hump[0]) ** 2 + (y - hump[1]) ** 2))

    hydro = HydrostaticState(rho0=rho0, p0=p0, phi=lambda x, y: g * (x + y),
                             grad_phi=lambda x, y: (g * _ones(x), g * _ones(y)),
                             gamma=gamma, theta0=theta0, grad_theta0=grad_theta0, grad_p0=grad_p0)
    initial = InitialCondition(
        rho=rho0,
        velocity=lambda x, y: (_zeros(x), _zeros(y)),
        pressure=lambda x, y: p0(x, y) + eps2 * p2(x, y),
        rho2=lambda x, y: _zeros(x),
        p2=p2,
    )
    boundary = BoundarySpec.uniform(BoundaryKind.TRANSMISSIVE_SPLIT, 2)
    return Scenario(
        name="isothermal",
        grid=Grid(0.0, 1.0, d.nx, 0.0, 1.0, d.ny),
        params=params,
        t_end=d.t_end,
        hydro=hydro,
        initial=initial,
        boundary=boundary,
        steady=not perturbed,
        constants={"rho_bar": rho_bar, "p_bar": p_bar, "g": g, "perturbed": perturbed,
                   "amplitude": amplitude, "hump_center": hump},
        description="Isothermal equilibrium under diagonal gravity, optionally with a pressure hump",
    )


def _bubble(d: _Defaults, opts: Dict[str, Any]) -> Scenario:
    gamma = d.gamma
    scales = ReferenceScales(p_ref=1.0e5, rho_ref=10.0, l_ref=1.0e3, t_ref=1.0e3)
    params = SimParams(eps=scales.eps, gamma=gamma, cfl=d.cfl, weights_mode=d.weights_mode)
    eps2 = params.eps2
    g_phys, T_bar, theta_c, r_c, center = 9.8, 300.0, 0.5, 250.0, (500.0, 350.0)
    g = scales.gravity(g_phys)
    theta_bar = T_bar / scales.theta_ref
    kappa = (gamma - 1.0) / gamma

    def exner(y):
        return 1.0 - kappa * g * y / theta_bar

    def rho0(x, y):
        return np.power(exner(y), 1.0 / (gamma - 1.0)) / theta_bar

    def grad_p0(x, y):
        slope = -kappa * g / theta_bar
        return _zeros(x), np.power(exner(y), 1.0 / kappa - 1.0) * slope / kappa

    def p0(x, y):
        return np.power(exner(y), 1.0 / kappa)

    def dtheta(x, y):
        """Dimensionless potential temperature perturbation."""
        r = np.sqrt((x - scales.length(center[0])) ** 2 + (y - scales.length(center[1])) ** 2)
        rc = scales.length(r_c)
        bump = 0.5 * theta_c * (1.0 + np.cos(np.pi * r / rc))
        return np.where(r <= rc, bump, 0.0) / scales.theta_ref

    hydro = HydrostaticState(
        rho0=rho0, p0=p0, phi=lambda x, y: g * y,
        grad_phi=lambda x, y: (_zeros(x), g * _ones(y)),
        gamma=gamma,
        theta0=lambda x, y: np.full_like(x, theta_bar, dtype=float),
        grad_p0=grad_p0,
    )
    initial = InitialCondition(
        rho=lambda x, y: np.power(exner(y), 1.0 / (gamma - 1.0)) / (theta_bar + dtheta(x, y)),
        velocity=lambda x, y: (_zeros(x), _zeros(y)),
        pressure=p0,
        theta2=lambda x, y: dtheta(x, y) / eps2,
    )
    return Scenario(
        name="bubble",
        grid=Grid(0.0, 1.0, d.nx, 0.0, 1.0, d.ny),
        params=params,
        t_end=d.t_end,
        hydro=hydro,
        initial=initial,
        boundary=BoundarySpec.uniform(BoundaryKind.INVISCID_WALL, 2),
        constants={"g": g_phys, "T_bar": T_bar, "theta_c": theta_c, "r_c": r_c, "center": center,
                   "gravity": g, "theta_bar": theta_bar},
        scales=scales,
        description="Rising warm bubble in a neutrally stratified atmosphere",
    )


def _igw(d: _Defaults, opts: Dict[str, Any]) -> Scenario:
    gamma = d.gamma
    scales = ReferenceScales(p_ref=1.0e5, rho_ref=0.1, l_ref=1.0e5, t_ref=1.0e5)
    params = SimParams(eps=scales.eps, gamma=gamma, cfl=d.cfl, weights_mode=d.weights_mode)
    eps2 = params.eps2
    R = scales.gas_constant
    g_phys, T_bar, brunt = 9.8, 300.0, 0.01
    theta_c, h_c, x_c, a_c, u_phys = 0.01, 1.0e4, 1.0e5, 5.0e3, 20.0
    g = scales.gravity(g_phys)
    stratification = brunt * brunt / g_phys
    kappa = (gamma - 1.0) / gamma

    def theta0_phys(y):
        return T_bar * np.exp(stratification * scales.to_dimensional_length(y))

    def exner(y):
        decay = np.exp(-stratification * scales.to_dimensional_length(y)) - 1.0
        return 1.0 + kappa * g_phys * g_phys / (R * T_bar * brunt * brunt) * decay

    def theta0(x, y):
        return theta0_phys(y) / scales.theta_ref + 0.0 * x

    def rho0(x, y):
        return np.power(exner(y), 1.0 / (gamma - 1.0)) / theta0(x, y)

    def p0(x, y):
        return np.power(exner(y), 1.0 / kappa) + 0.0 * x

    def grad_p0(x, y):
        decay = np.exp(-stratification * scales.to_dimensional_length(y))
        slope = -kappa * g_phys * g_phys / (R * T_bar * brunt * brunt) * stratification * scales.l_ref * decay
        return _zeros(x), np.power(exner(y), 1.0 / kappa - 1.0) * slope / kappa

    def dtheta(x, y):
        xd, yd = scales.to_dimensional_length(x), scales.to_dimensional_length(y)
        bump = theta_c * np.sin(np.pi * yd / h_c) / (1.0 + (xd - x_c) ** 2 / a_c ** 2)
        return bump / scales.theta_ref

    hydro = HydrostaticState(
        rho0=rho0, p0=p0, phi=lambda x, y: g * y,
        grad_phi=lambda x, y: (_zeros(x), g * _ones(y)),
        gamma=gamma,
        theta0=theta0,
        grad_theta0=lambda x, y: (_zeros(x), scales.l_ref * stratification * theta0(x, y)),
        grad_p0=grad_p0,
    )
    u = u_phys / scales.u_ref
    initial = InitialCondition(
        rho=lambda x, y: np.power(exner(y), 1.0 / (gamma - 1.0)) / (theta0(x, y) + dtheta(x, y)),
        velocity=lambda x, y: (u * _ones(x), _zeros(y)),
        pressure=p0,
        theta2=lambda x, y: dtheta(x, y) / eps2,
    )
    boundary = BoundarySpec({"x-": BoundaryKind.PERIODIC, "x+": BoundaryKind.PERIODIC,
                             "y-": BoundaryKind.INVISCID_WALL, "y+": BoundaryKind.INVISCID_WALL})
    return Scenario(
        name="igw",
        grid=Grid(0.0, 3.0, d.nx, 0.0, 0.1, d.ny),
        params=params,
        t_end=d.t_end,
        hydro=hydro,
        initial=initial,
        boundary=boundary,
        constants={"g": g_phys, "T_bar": T_bar, "N": brunt, "theta_c": theta_c, "h_c": h_c,
                   "x_c": x_c, "a_c": a_c, "u": u_phys, "gravity": g},
        scales=scales,
        description="Inertia-gravity wave in a stably stratified channel",
    )


# name -> (builder, defaults, eps rule); the rule is None when eps is fixed by the case
_CASES: Dict[str, Tuple[Callable[[_Defaults, Dict[str, Any]], Scenario], _Defaults, Optional[str]]] = {
    "accuracy1d": (_accuracy1d, _Defaults(nx=64, ny=None, eps=1e-2, cfl=0.2, t_end=0.1), "nonnegative"),
    "shocktube": (_shocktube, _Defaults(nx=200, ny=None, eps=0.9, cfl=0.2, t_end=0.1), "positive"),
    "accuracy2d": (_accuracy2d, _Defaults(nx=32, ny=32, eps=1e-2, cfl=0.2, t_end=0.05), "nonnegative"),
    "vortex": (_vortex, _Defaults(nx=200, ny=100, eps=0.05, cfl=0.2, t_end=1.0, gamma=2.0), None),
    "isothermal": (_isothermal, _Defaults(nx=50, ny=50, eps=0.9, cfl=0.2, t_end=1.0), "positive"),
    "bubble": (_bubble, _Defaults(nx=100, ny=100, eps=1e-2, cfl=0.2, t_end=0.7), None),
    "igw": (_igw, _Defaults(nx=400, ny=50, eps=1e-3, cfl=0.01, t_end=0.03), None),
}


def list_cases() -> List[str]:
    return list(_CASES)


def _resolve_ny(defaults: _Defaults, nx: Optional[int], ny: Optional[int]) -> Optional[int]:
    if defaults.ny is None:
        return None
    if ny is not None:
        return ny
    if nx is None:
        return defaults.ny
    # keep the default aspect ratio of the mesh
    return max(1, round(nx * defaults.ny / defaults.nx))


def build_case(name: str, **overrides) -> Scenario:
    """
    Build a benchmark scenario with optional overrides.

    Args:
        name: One of ``list_cases()``
        **overrides: nx, ny, eps, cfl, t_end, weights_mode, plus case options
            (``p2_variant`` for accuracy2d, ``perturbed`` for isothermal).
            ``None`` values are ignored.

    Returns:
        Fully populated scenario

    Raises:
        ConfigurationError: On an unknown case, an unknown option or an override the
            case does not allow
    """
    if name not in _CASES:
        raise ConfigurationError(f"Unknown case {name!r}, available: {', '.join(_CASES)}")
    builder, defaults, eps_rule = _CASES[name]
    overrides = {k: v for k, v in overrides.items() if v is not None}
    allowed = COMMON_OVERRIDES + CASE_OPTIONS.get(name, ())
    unknown = sorted(set(overrides) - set(allowed))
    if unknown:
        raise ConfigurationError(f"Case {name!r} does not accept options {unknown}")

    if defaults.ny is None and "ny" in overrides:
        raise ConfigurationError(f"Case {name!r} is one-dimensional; ny cannot be set")
    eps = overrides.get("eps")
    if eps is not None and eps != defaults.eps:
        if eps_rule is None:
            raise ConfigurationError(f"Case {name!r} fixes eps = {defaults.eps:g}; it cannot be overridden")
        if eps_rule == "positive" and not eps > 0.0:
            raise ConfigurationError(f"Case {name!r} requires eps > 0, got {eps}")
        if eps_rule == "nonnegative" and not eps >= 0.0:
            raise ConfigurationError(f"Case {name!r} requires eps >= 0, got {eps}")

    resolved = _Defaults(
        nx=int(overrides.get("nx", defaults.nx)),
        ny=_resolve_ny(defaults, overrides.get("nx"), overrides.get("ny")),
        eps=float(overrides.get("eps", defaults.eps)),
        cfl=float(overrides.get("cfl", defaults.cfl)),
        t_end=float(overrides.get("t_end", defaults.t_end)),
        gamma=defaults.gamma,
        weights_mode=WeightsMode(overrides.get("weights_mode", defaults.weights_mode)),
    )
    if resolved.t_end < 0.0:
        raise ConfigurationError(f"t_end must be >= 0, got {resolved.t_end}")
    options = {k: overrides[k] for k in CASE_OPTIONS.get(name, ()) if k in overrides}
    scenario = builder(resolved, options)
    logger.info(f"Built case {name}: grid {scenario.grid.counts}, eps={scenario.params.eps:g}, "
                f"T={scenario.t_end:g}")
    return scenario


def _sample(fn: ScalarFn, grid: Grid) -> np.ndarray:
    return np.array(np.broadcast_to(np.asarray(fn(*grid.coords), dtype=float), grid.shape))


def initial_state(scenario: Scenario) -> ConservedField:
    """
    Sample the initial condition on every node (ghosts included) and fill the ghosts.

    The sampled state and perturbations are pinned as inflow data, so inflow sides
    keep the initial exterior values for the whole run.

    Raises:
        DomainError: If the initial density or pressure is not positive
    """
    grid, params = scenario.grid, scenario.params
    periodic = scenario.boundary.periodic_axes(grid.dim)
    bg = scenario.hydro.sample(grid, periodic)
    init = scenario.initial
    rho = _sample(init.rho, grid)
    u = [np.array(np.broadcast_to(np.asarray(c, dtype=float), grid.shape)) for c in init.velocity(*grid.coords)]
    p = _sample(init.pressure, grid)

    if init.theta2 is not None:
        theta2 = _sample(init.theta2, grid)
    elif params.eps > 0.0:
        theta2 = (potential_temperature(rho, p, params.gamma) - bg.theta0) / params.eps2
    else:
        theta2 = np.zeros(grid.shape)

    state = ConservedField.from_primitive(grid, rho, u, p, theta2, params)
    if init.rho2 is not None and init.p2 is not None:
        pert = PerturbationField(_sample(init.rho2, grid), _sample(init.p2, grid), theta2.copy())
    elif params.eps > 0.0:
        pert = perturbation_extract(state, scenario.hydro, params, periodic)
    else:
        raise ConfigurationError(f"Case {scenario.name!r} at eps = 0 needs initial rho2 and p2")
    state.perturbation = pert

    spec = scenario.boundary
    if spec.has_inflow():
        spec.pin("state", state.data)
        spec.pin("rho2", pert.rho2)
        spec.pin("p2", pert.p2)
        spec.pin("theta2", pert.theta2)
    fill_ghosts(state, spec, scenario.hydro)
    for name in ("rho2", "p2"):
        fill_scalar_ghosts(getattr(pert, name), grid, spec, name)
    pert.theta2 = state.theta2.copy()
    return state
