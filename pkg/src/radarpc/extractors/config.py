"""Extractor parameterisations and their flat ``key=value`` text form.

``parse_config("ca T=35")`` and ``parse_config("extractor=ca T=35")`` are equivalent;
:func:`format_config` writes the second form back out.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar, Union


class ConfigError(ValueError):
    pass


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class CfarWindow:
    size: int = 100
    guard: int = 5

    def __post_init__(self):
        _check(self.size >= 2 and self.size % 2 == 0, f"window size N must be even and >= 2, got {self.size}")
        _check(self.guard >= 0, f"guard cells g must be >= 0, got {self.guard}")

    @property
    def half(self) -> int:
        return self.size // 2


@dataclass(frozen=True)
class _Cfar:
    T: float
    N: int = 100
    g: int = 5

    is_cfar: ClassVar[bool] = True

    def __post_init__(self):
        _check(math.isfinite(self.T) and self.T > 0, f"{self.kind}: T must be > 0, got {self.T}")
        CfarWindow(self.N, self.g)

    @property
    def window(self) -> CfarWindow:
        return CfarWindow(self.N, self.g)


@dataclass(frozen=True)
class CA(_Cfar):
    kind: ClassVar[str] = "ca"


@dataclass(frozen=True)
class CAGO(_Cfar):
    kind: ClassVar[str] = "cago"


@dataclass(frozen=True)
class CASO(_Cfar):
    kind: ClassVar[str] = "caso"


@dataclass(frozen=True)
class IS(_Cfar):
    alpha: float = 0.075
    I: int = 6
    kind: ClassVar[str] = "is"

    def __post_init__(self):
        super().__post_init__()
        _check(self.alpha > 0, f"is: alpha must be > 0, got {self.alpha}")
        _check(self.I >= 0, f"is: I must be >= 0, got {self.I}")


@dataclass(frozen=True)
class VI(_Cfar):
    V: float = 5.0
    R: float = 1.5
    kind: ClassVar[str] = "vi"

    def __post_init__(self):
        super().__post_init__()
        _check(self.V > 0, f"vi: V must be > 0, got {self.V}")
        _check(self.R > 1, f"vi: R must be > 1, got {self.R}")


@dataclass(frozen=True)
class OS(_Cfar):
    q: float = 0.5
    kind: ClassVar[str] = "os"

    def __post_init__(self):
        super().__post_init__()
        _check(0 < self.q < 1, f"os: quantile q must lie in (0, 1), got {self.q}")


@dataclass(frozen=True)
class TM(_Cfar):
    N_T: int = 0
    kind: ClassVar[str] = "tm"

    def __post_init__(self):
        super().__post_init__()
        _check(0 <= self.N_T < self.N / 2, f"tm: need 0 <= N_T < N/2, got N_T={self.N_T}")


@dataclass(frozen=True)
class MSCA(_Cfar):
    M: int = 8
    kind: ClassVar[str] = "msca"

    def __post_init__(self):
        super().__post_init__()
        _check(2 <= self.M <= self.N // 2, f"msca: need 2 <= M <= N/2, got M={self.M}")


@dataclass(frozen=True)
class BFAR(_Cfar):
    b: float = 0.0
    kind: ClassVar[str] = "bfar"

    def __post_init__(self):
        super().__post_init__()
        _check(not math.isnan(self.b) and self.b != math.inf, f"bfar: b must be a finite dB value or -inf")

    @property
    def b_eff(self) -> float:
        """Static offset in squared Watts (``b`` is given in dB)."""
        if self.b == -math.inf:
            return 0.0
        return (10.0 ** (self.b / 10.0)) ** 2


@dataclass(frozen=True)
class KStrongest:
    K: int
    z_min: float
    kind: ClassVar[str] = "kstr"
    is_cfar: ClassVar[bool] = False

    def __post_init__(self):
        _check(self.K >= 1, f"kstr: K must be >= 1, got {self.K}")
        _check(not math.isnan(self.z_min), "kstr: z_min must be a number")


@dataclass(frozen=True)
class C18:
    w_binom: float
    z_q: float
    kind: ClassVar[str] = "c18"
    is_cfar: ClassVar[bool] = False

    def __post_init__(self):
        _check(self.w_binom >= 1, f"c18: w_binom must be >= 1, got {self.w_binom}")
        _check(self.z_q > 0, f"c18: z_q must be > 0, got {self.z_q}")


@dataclass(frozen=True)
class C19:
    l_max: int
    region_drop: float = 0.5
    kind: ClassVar[str] = "c19"
    is_cfar: ClassVar[bool] = False

    def __post_init__(self):
        _check(self.l_max >= 1, f"c19: l_max must be >= 1, got {self.l_max}")
        _check(0 < self.region_drop < 1, f"c19: region_drop must lie in (0, 1), got {self.region_drop}")


@dataclass(frozen=True)
class CFEAR:
    k: int
    z_min: float
    r: float = 0.5
    grid: float = 0.5
    p_min: int = 5
    kind: ClassVar[str] = "cfear"
    is_cfar: ClassVar[bool] = False

    def __post_init__(self):
        _check(self.k >= 1, f"cfear: k must be >= 1, got {self.k}")
        _check(self.r > 0, f"cfear: r must be > 0, got {self.r}")
        _check(self.grid > 0, f"cfear: grid must be > 0, got {self.grid}")
        _check(self.p_min >= 2, f"cfear: p_min must be >= 2, got {self.p_min}")


ExtractorConfig = Union[CA, CAGO, CASO, IS, VI, OS, TM, MSCA, BFAR, KStrongest, C18, C19, CFEAR]

CFAR_KINDS = ("ca", "cago", "caso", "is", "vi", "os", "tm", "msca", "bfar")
KINDS = {cls.kind: cls for cls in (CA, CAGO, CASO, IS, VI, OS, TM, MSCA, BFAR, KStrongest, C18, C19, CFEAR)}
_KIND_ALIASES = {"k-strongest": "kstr", "kstrongest": "kstr", "k_strongest": "kstr"}

# alternative spellings seen in tables and on the command line
_KEY_ALIASES = {
    "kstr": {"k": "K"},
    "c18": {"w_b": "w_binom", "wb": "w_binom"},
    "tm": {"n_t": "N_T", "NT": "N_T"},
    "os": {"quantile": "q"},
    "cfear": {"K": "k", "grid_side": "grid"},
}

_INT_FIELDS = {"N", "g", "I", "N_T", "M", "K", "k", "l_max", "p_min"}


def config_class(kind: str):
    kind = _KIND_ALIASES.get(kind.lower(), kind.lower())
    if kind not in KINDS:
        raise ConfigError(f"unknown extractor {kind!r}; choose from {', '.join(KINDS)}")
    return KINDS[kind]


def _coerce(name: str, text: str):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"parameter {name}={text!r} is not a number") from None
    if name in _INT_FIELDS:
        if value != int(value):
            raise ConfigError(f"parameter {name} must be an integer, got {text}")
        return int(value)
    return value


def make_config(kind: str, **params) -> ExtractorConfig:
    cls = config_class(kind)
    aliases = _KEY_ALIASES.get(cls.kind, {})
    fields = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in params.items():
        name = aliases.get(key, key)
        if name not in fields:
            raise ConfigError(f"{cls.kind}: unknown parameter {key!r}; expected one of {sorted(fields)}")
        kwargs[name] = _coerce(name, str(value)) if isinstance(value, str) else value
        if name in _INT_FIELDS and not isinstance(kwargs[name], int):
            kwargs[name] = _coerce(name, repr(kwargs[name]))
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{cls.kind}: {exc}") from None


def parse_config(text: str) -> ExtractorConfig:
    tokens = text.split()
    if not tokens:
        raise ConfigError("empty extractor config")
    kind = None
    params: dict[str, str] = {}
    for i, tok in enumerate(tokens):
        if "=" not in tok:
            if i == 0:
                kind = tok
                continue
            raise ConfigError(f"malformed token {tok!r}; expected key=value")
        key, _, value = tok.partition("=")
        if not key or not value:
            raise ConfigError(f"malformed token {tok!r}; expected key=value")
        if key == "extractor":
            kind = value
        elif key in params:
            raise ConfigError(f"duplicate key {key!r}")
        else:
            params[key] = value
    if kind is None:
        raise ConfigError("extractor kind missing (e.g. 'extractor=ca T=35')")
    return make_config(kind, **params)


def config_params(cfg: ExtractorConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}


def _num(v) -> str:
    if isinstance(v, int):
        return str(v)
    if v == -math.inf:
        return "-inf"
    return f"{v:.12g}"


def format_config(cfg: ExtractorConfig, include_defaults: bool = False) -> str:
    parts = [f"extractor={cfg.kind}"]
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if not include_defaults and f.default is not dataclasses.MISSING and value == f.default:
            continue
        parts.append(f"{f.name}={_num(value)}")
    return " ".join(parts)


def load_config(arg: str) -> ExtractorConfig:
    """A flat config string, or the path of a file holding one."""
    path = Path(arg)
    if "=" not in arg and path.is_file():
        text = "\n".join(
            ln.split("#", 1)[0] for ln in path.read_text(encoding="utf-8").splitlines()
        )
        return parse_config(text)
    return parse_config(arg)


Z_MIN_F1 = 31.875
Z_MIN_F2 = 44.625

PRESETS: dict[str, list[ExtractorConfig]] = {
    "f1-defaults": [
        CA(T=35), CAGO(T=25), CASO(T=400), IS(T=15, alpha=0.075), VI(T=400, V=5),
        OS(T=120), TM(T=100, N_T=30), MSCA(T=100, M=8), BFAR(T=15, b=19.13),
        KStrongest(K=5, z_min=Z_MIN_F1), C18(w_binom=10, z_q=2.75), C19(l_max=400),
        CFEAR(k=20, z_min=Z_MIN_F1, r=0.5),
    ],
    "f2-defaults": [
        CA(T=55), CAGO(T=50), CASO(T=3700), IS(T=5, alpha=0.003), VI(T=2000, V=5),
        OS(T=1000), TM(T=1050, N_T=44), MSCA(T=400, M=10), BFAR(T=12.5, b=38.25),
        KStrongest(K=3, z_min=Z_MIN_F2), C18(w_binom=6, z_q=2), C19(l_max=300),
        CFEAR(k=20, z_min=Z_MIN_F2, r=0.5),
    ],
}


def load_config_list(arg: str) -> list[ExtractorConfig]:
    """A preset name, or a file with one flat config per line."""
    if arg in PRESETS:
        return list(PRESETS[arg])
    path = Path(arg)
    if not path.is_file():
        raise ConfigError(f"{arg!r} is neither a preset ({', '.join(PRESETS)}) nor a config file")
    out = []
    for ln in path.read_text(encoding="utf-8").splitlines():
        ln = ln.split("#", 1)[0].strip()
        if ln:
            out.append(parse_config(ln))
    if not out:
        raise ConfigError(f"{arg}: no extractor configs found")
    return out
