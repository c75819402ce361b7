"""Run configuration: ``key = value`` text files with ``#`` comments."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

__all__ = ["RunConfig", "ConfigError", "parse_config", "format_config", "format_value"]


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s: str):
    return None if s.strip().lower() in ("none", "") else float(s)


def _opt_int(s: str):
    return None if s.strip().lower() in ("none", "auto", "") else int(s)


def _floats(s: str) -> tuple:
    return tuple(float(t) for t in s.replace(",", " ").split())


def _choice(*opts):
    def conv(s: str) -> str:
        v = s.strip().lower()
        if v not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return v

    return conv


@dataclass
class RunConfig:
    nx: int = 10
    ny: int = 10
    nz: int = 10
    box_cm: float = 5.0
    basis: str = "const"
    spatial_order: int = 1
    angular: str = "uniform"
    level: int = 2
    l_max: int = 2
    N: int = 8
    alpha: float = 1.0
    sigma_a: float = 0.0
    transport_correction: bool = False
    source: str = "uniform"
    source_strength: float = 1.0
    beam_footprint_cm: tuple = (2.0, 3.0, 2.0, 3.0)
    preconditioner: str = "mg"
    cycle: str = "v11"
    nr: int | None = None  # None: full order N
    coarse_sweeps: int = 10
    coarse_tol: float | None = None
    tol: float = 1e-8
    max_iter: int = 500
    threads: int | None = None
    study_nr: tuple = ()  # study mode: reduced orders to scan (empty: 0..N)
    allow_large: bool = False

    @property
    def unknowns(self) -> int:
        from .sphere_mesh import build_banded_mesh

        cells = self.nx * self.ny * self.nz
        ns = 8 if self.spatial_order == 1 else 1
        da = 3 if self.basis == "lin" else 1
        npatch = 8 * 4**self.level if self.angular == "uniform" else len(build_banded_mesh(self.l_max))
        return cells * ns * da * npatch

    def memory_estimate_mb(self) -> float:
        """Rough peak: about 16 flux-sized vectors for Krylov plus the hierarchy."""
        return 16 * 1.4 * self.unknowns * 8 / 2**20


_CONVERTERS = {
    "nx": int,
    "ny": int,
    "nz": int,
    "box_cm": float,
    "basis": _choice("const", "lin"),
    "spatial_order": int,
    "angular": _choice("uniform", "banded"),
    "level": int,
    "l_max": int,
    "N": int,
    "alpha": float,
    "sigma_a": float,
    "transport_correction": _bool,
    "source": _choice("uniform", "beam"),
    "source_strength": float,
    "beam_footprint_cm": _floats,
    "preconditioner": _choice("sweep", "mg"),
    "cycle": _choice("v10", "v11"),
    "nr": _opt_int,
    "coarse_sweeps": int,
    "coarse_tol": _opt_float,
    "tol": float,
    "max_iter": int,
    "threads": _opt_int,
    "study_nr": lambda s: tuple(int(t) for t in s.replace(",", " ").split()),
    "allow_large": _bool,
}
assert set(_CONVERTERS) == {f.name for f in fields(RunConfig)}

LARGE_UNKNOWNS = 2_000_000


def _validate(cfg: RunConfig, where: dict) -> None:
    def fail(key, msg):
        line = where.get(key)
        prefix = f"line {line}: " if line else ""
        raise ConfigError(f"{prefix}{msg}")

    for k in ("nx", "ny", "nz"):
        if getattr(cfg, k) < 1:
            fail(k, f"{k} must be >= 1")
    if cfg.box_cm <= 0:
        fail("box_cm", "box_cm must be positive")
    if cfg.spatial_order not in (0, 1):
        fail("spatial_order", "spatial_order must be 0 or 1")
    if cfg.level < 0:
        fail("level", "level must be >= 0")
    if cfg.l_max < 1:
        fail("l_max", "l_max must be >= 1")
    if cfg.N < 1:
        fail("N", "N must be >= 1")
    if cfg.alpha <= 0:
        fail("alpha", "alpha must be positive")
    if cfg.sigma_a < 0:
        fail("sigma_a", "sigma_a must be >= 0")
    if cfg.nr is not None and not 0 <= cfg.nr <= cfg.N:
        fail("nr", f"nr exceeds N ({cfg.nr} > {cfg.N})" if cfg.nr > cfg.N else "nr must be >= 0")
    if any(n > cfg.N or n < 0 for n in cfg.study_nr):
        fail("study_nr", "study_nr entry outside 0..N (nr exceeds N)")
    if cfg.coarse_sweeps < 0:
        fail("coarse_sweeps", "coarse_sweeps must be >= 0")
    if cfg.coarse_tol is not None and cfg.coarse_tol <= 0:
        fail("coarse_tol", "coarse_tol must be positive")
    if cfg.tol <= 0:
        fail("tol", "tol must be positive")
    if cfg.max_iter < 1:
        fail("max_iter", "max_iter must be >= 1")
    if cfg.threads is not None and cfg.threads < 1:
        fail("threads", "threads must be >= 1")
    if len(cfg.beam_footprint_cm) != 4:
        fail("beam_footprint_cm", "beam_footprint_cm needs four numbers: x0 x1 y0 y1")
    x0, x1, y0, y1 = cfg.beam_footprint_cm
    inside = 0 <= x0 < x1 <= cfg.box_cm and 0 <= y0 < y1 <= cfg.box_cm
    if cfg.source == "beam" and not inside:
        fail("beam_footprint_cm", "beam footprint must lie inside the z = 0 face")


def parse_config(text: str) -> RunConfig:
    """Parse and validate; every error names its line."""
    values, where = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (t.strip() for t in line.split("=", 1))
        if key not in _CONVERTERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _CONVERTERS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        where[key] = lineno
    cfg = RunConfig(**values)
    _validate(cfg, where)
    return cfg


def format_value(v) -> str:
    if isinstance(v, tuple):
        return " ".join(format_value(t) for t in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return "none" if v is None else str(v)


def format_config(cfg: RunConfig) -> str:
    """Every effective parameter, in a form :func:`parse_config` reads back."""
    return "\n".join(f"{k} = {format_value(v)}" for k, v in asdict(cfg).items()) + "\n"
