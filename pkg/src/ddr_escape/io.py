"""Scenario configuration, CSV export and SVG rendering."""

from __future__ import annotations

import csv
import io as _io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import GameParams, InvalidParamsError, RealisticState
from .inverse import PartitionClass, PartitionMap
from .simulator import Trajectory
from .terminal import classify_boundary

PARAM_KEYS = ("v_r_max", "v_d_max", "b", "r_d")
STATE_KEYS = ("x_p", "y_p", "x_e", "y_e", "theta_e")
SYNTH_KEYS = ("s", "tau")
RUN_KEYS = ("dt", "t_max")
CONFIG_KEYS = PARAM_KEYS + SYNTH_KEYS + RUN_KEYS + STATE_KEYS

TRAJECTORY_HEADER = ("t", "x_p", "y_p", "x_e", "y_e", "theta_e", "u1", "u2",
                     "v_p", "psi_p", "x_red", "y_red", "phase")

DEFAULT_DT = 1e-3
DEFAULT_T_MAX = 60.0


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    params: GameParams
    initial: RealisticState | None = None
    s: float | None = None
    tau: float | None = None
    dt: float = DEFAULT_DT
    t_max: float = DEFAULT_T_MAX

    def __post_init__(self):
        if (self.s is None) != (self.tau is None):
            raise ConfigError("s and tau must be given together")
        if (self.initial is None) == (self.s is None):
            raise ConfigError("give exactly one of an initial state (x_p, y_p, x_e, y_e, "
                              "theta_e) or a synthesis spec (s, tau)")
        if not self.dt > 0.0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not self.t_max > 0.0:
            raise ConfigError(f"t_max must be > 0, got {self.t_max}")


def parse_config(text: str) -> ScenarioConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            num = float(val)
        except ValueError:
            raise ConfigError(f"line {lineno}: {key} must be a number, got {val!r}") from None
        if not math.isfinite(num):
            raise ConfigError(f"line {lineno}: {key} must be finite, got {val!r}")
        values[key] = num

    missing = [k for k in PARAM_KEYS if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    try:
        params = GameParams(**{k: values[k] for k in PARAM_KEYS})
    except InvalidParamsError as exc:
        raise ConfigError(f"invalid game parameters: {exc}") from None

    state_given = [k for k in STATE_KEYS if k in values]
    if state_given and len(state_given) != len(STATE_KEYS):
        absent = [k for k in STATE_KEYS if k not in values]
        raise ConfigError(f"incomplete initial state, missing: {', '.join(absent)}")
    initial = RealisticState(*(values[k] for k in STATE_KEYS)) if state_given else None
    return ScenarioConfig(params=params, initial=initial, s=values.get("s"),
                          tau=values.get("tau"), dt=values.get("dt", DEFAULT_DT),
                          t_max=values.get("t_max", DEFAULT_T_MAX))


def load_config(path: str | Path) -> ScenarioConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical text form; ``parse_config`` of it returns an equal config."""
    p = cfg.params
    items = [(k, getattr(p, k)) for k in PARAM_KEYS]
    if cfg.initial is not None:
        items += list(zip(STATE_KEYS, cfg.initial.as_tuple()))
    else:
        items += [("s", cfg.s), ("tau", cfg.tau)]
    items += [("dt", cfg.dt), ("t_max", cfg.t_max)]
    return "".join(f"{k} = {v!r}\n" for k, v in items)


# ----------------------------------------------------------------------------
# CSV


def _fmt(v: float) -> str:
    return "%.9g" % v


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for k in range(len(traj)):
            row = [traj.t[k], *traj.realistic[k], *traj.evader[k], *traj.pursuer[k],
                   *traj.reduced[k]]
            w.writerow([_fmt(v) for v in row] + [traj.phase[k]])


def read_trajectory_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of a trajectory file, floats as arrays and ``phase`` as strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRAJECTORY_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
    cols = list(zip(*rows[1:])) if len(rows) > 1 else [()] * len(TRAJECTORY_HEADER)
    out = {name: np.array(col, dtype=float) for name, col in zip(TRAJECTORY_HEADER[:-1], cols)}
    out["phase"] = np.array(cols[-1], dtype=str)
    return out


def write_partition_csv(pmap: PartitionMap, path: str | Path) -> None:
    np.savetxt(path, pmap.codes, fmt="%d", delimiter=",")


def read_partition_csv(path: str | Path) -> np.ndarray:
    return np.loadtxt(path, dtype=np.int8, delimiter=",", ndmin=2)


# ----------------------------------------------------------------------------
# SVG

PARTITION_COLORS = {
    PartitionClass.OUTSIDE: "#ffffff",
    PartitionClass.PRIMARY: "#3b6fd8",
    PartitionClass.ROTATION: "#e0b020",
    PartitionClass.TRANSITION: "#d62728",
    PartitionClass.DISPERSAL: "#2ca02c",
}


def _svg_bytes(fig) -> bytes:
    import matplotlib

    buf = _io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": "ddr-escape", "svg.fonttype": "path"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def _usable_arcs(ax, params: GameParams) -> None:
    s = np.linspace(0.0, 2.0 * math.pi, 1441)
    usable = np.array([classify_boundary(v, params).usable for v in s])
    xs, ys = params.r_d * np.sin(s), params.r_d * np.cos(s)
    ax.plot(xs, ys, color="black", lw=0.6)
    xs_u = np.where(usable, xs, np.nan)
    ys_u = np.where(usable, ys, np.nan)
    ax.plot(xs_u, ys_u, color="black", lw=2.5)
    t = np.linspace(0.0, 2.0 * math.pi, 361)
    ax.plot(params.b * np.sin(t), params.b * np.cos(t), color="black", lw=0.8, ls="--")


def render_partition_svg(pmap: PartitionMap, path: str | Path) -> None:
    """Partition map with the usable arcs in bold and the evader radius dashed."""
    from matplotlib.colors import ListedColormap
    from matplotlib.figure import Figure
    from matplotlib.patches import Patch

    p = pmap.params
    cmap = ListedColormap([PARTITION_COLORS[c] for c in PartitionClass])
    fig = Figure(figsize=(5.5, 5.5))
    ax = fig.add_subplot()
    rd = p.r_d
    ax.imshow(pmap.codes, cmap=cmap, vmin=-0.5, vmax=4.5, extent=(-rd, rd, -rd, rd),
              origin="upper", interpolation="nearest")
    _usable_arcs(ax, p)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"rho_v = {p.rho_v:g}, rho_l = {p.rho_l:g}")
    handles = [Patch(color=PARTITION_COLORS[c], label=c.name.lower())
               for c in PartitionClass if c is not PartitionClass.OUTSIDE]
    ax.legend(handles=handles, loc="upper right", fontsize=7)
    Path(path).write_bytes(_svg_bytes(fig))


def render_trajectory_svg(traj: Trajectory, params: GameParams, path: str | Path) -> None:
    """World-frame paths (left) and the reduced-space path (right)."""
    from matplotlib.figure import Figure

    fig = Figure(figsize=(10, 5))
    ax, bx = fig.subplots(1, 2)
    r = traj.realistic
    ax.plot(r[:, 2], r[:, 3], color="#3b6fd8", label="evader")
    ax.plot(r[:, 0], r[:, 1], color="#d62728", label="pursuer")
    ax.plot(r[0, 2], r[0, 3], "o", color="#3b6fd8")
    ax.plot(r[0, 0], r[0, 1], "o", color="#d62728")
    t = np.linspace(0.0, 2.0 * math.pi, 361)
    ax.plot(r[-1, 2] + params.r_d * np.cos(t), r[-1, 3] + params.r_d * np.sin(t),
            color="gray", lw=0.6, ls=":")
    ax.set_aspect("equal")
    ax.set_title("world frame")
    ax.legend(fontsize=7)
    red = traj.reduced
    rot = np.array([ph == "rotation" for ph in traj.phase])
    bx.plot(red[:, 0], red[:, 1], color="#3b6fd8", lw=1.0)
    bx.plot(red[rot, 0], red[rot, 1], ".", color="#e0b020", ms=1.5, label="rotation")
    _usable_arcs(bx, params)
    bx.set_aspect("equal")
    bx.set_title("reduced space")
    bx.legend(fontsize=7)
    Path(path).write_bytes(_svg_bytes(fig))
