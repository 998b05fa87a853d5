"""Command-line drivers: flow | translate | radial | compare.

Runs are configured by a single JSON document; every flag after the config
path overrides a config key by dotted path, e.g.

    gcflow flow configs/ellipse_demo.json --grid.nx=100 --flow.t_end=0.2

Outputs land in the config's output_dir: trace.csv / speeds.csv /
profile.csv, PGM frames with min-max sidecars, and summary.json (which
echoes the effective config verbatim).  Exit codes: 0 success, 2 config
error, 3 numerical failure, 4 non-convergence reported (results written).
"""

import argparse
import json
import sys
import time

import numpy as np

from gcflow import elliptic, flow, radial, runio
from gcflow.domain import DomainSpec, GridSpec, build_topology, poly2d
from gcflow.errors import ConfigError, GCFlowError
from gcflow.fields import ScalarField, SpeedLaw, gradient_sup

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NONCONVERGED = 4


def _section(cfg, name, required=True):
    value = cfg.get(name)
    if value is None:
        if required:
            raise ConfigError(f"config section {name!r} is missing")
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return value


def _get(section, key, default=None, required=False):
    if key in section:
        return section[key]
    if required:
        raise ConfigError(f"config key {key!r} is missing")
    return default


def build_domain(cfg):
    sec = _section(cfg, "domain")
    preset = _get(sec, "preset", required=True)
    try:
        if preset == "ellipse":
            return DomainSpec.ellipse(
                q=_get(sec, "q", 1.1), a=_get(sec, "a", 1.0), b=_get(sec, "b", 4.0)
            )
        if preset == "disk":
            return DomainSpec.disk(radius=_get(sec, "radius", 0.5))
        if preset == "polynomial":
            return DomainSpec.polynomial(_get(sec, "coeffs", required=True))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad domain parameters: {exc}") from exc
    raise ConfigError(f"unknown domain preset {preset!r}")


def build_grid(cfg):
    sec = _section(cfg, "grid")
    try:
        return GridSpec(
            x_min=float(_get(sec, "x_min", required=True)),
            x_max=float(_get(sec, "x_max", required=True)),
            y_min=float(_get(sec, "y_min", required=True)),
            y_max=float(_get(sec, "y_max", required=True)),
            nx=int(_get(sec, "nx", required=True)),
            ny=int(_get(sec, "ny", required=True)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad grid: {exc}") from exc


def build_initial(cfg):
    sec = _section(cfg, "initial")
    coeffs = _get(sec, "coeffs", required=True)
    try:
        f, _, _ = poly2d(coeffs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return f


def _weight_from_config(sec, n):
    preset = _get(sec, "preset", "constant")
    try:
        if preset == "constant":
            return radial.RadialWeight.constant(_get(sec, "c", 1.0))
        if preset == "inverse_power":
            return radial.RadialWeight.inverse_power(
                a=_get(sec, "a", 1.0), k=_get(sec, "k", 2.0), n=n
            )
        if preset == "gaussian":
            return radial.RadialWeight.gaussian(
                a=_get(sec, "a", 1.0), b=_get(sec, "b", 1.0), n=n
            )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad weight parameters: {exc}") from exc
    raise ConfigError(f"unknown weight preset {preset!r}")


def build_law(cfg):
    sec = _section(cfg, "law")
    kind = _get(sec, "kind", required=True)
    if kind == "constant":
        value = _get(sec, "value", 1.0)
        try:
            return SpeedLaw.constant(value)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    n = _get(sec, "n", 2)
    weight_sec = sec.get("weight")
    weight_fn = None
    if weight_sec is not None:
        w = _weight_from_config(weight_sec, n)
        weight_fn = lambda x, y: w.g(np.sqrt(x * x + y * y))  # noqa: E731
    if kind == "euclidean_graph":
        return SpeedLaw.euclidean_graph(n=n, weight=weight_fn)
    if kind == "minkowski_graph":
        return SpeedLaw.minkowski_graph(n=n, weight=weight_fn)
    raise ConfigError(f"unknown speed law {kind!r}")


def build_flow_params(cfg):
    sec = _section(cfg, "flow")
    try:
        return flow.FlowParams(
            t_end=float(_get(sec, "t_end", required=True)),
            delta_tol=(
                None if _get(sec, "delta_tol") in (None, 0, 0.0)
                else float(sec["delta_tol"])
            ),
            record_every=int(_get(sec, "record_every", 10)),
            sigma=float(_get(sec, "sigma", 0.4)),
            max_steps=int(_get(sec, "max_steps", 5_000_000)),
            transient_steps=int(_get(sec, "transient_steps", 5)),
            snapshot_times=tuple(_get(sec, "snapshot_times", ())),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad flow parameters: {exc}") from exc


def _setup(cfg):
    domain = build_domain(cfg)
    grid = build_grid(cfg)
    u0_fn = build_initial(cfg)
    law = build_law(cfg)
    try:
        topo = build_topology(domain, grid, u0=u0_fn)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    u0 = ScalarField.from_function(topo, u0_fn)
    return topo, u0, law


def _error_record(exc):
    return {"type": type(exc).__name__, "message": str(exc)}


def _base_summary(cfg, started):
    return {
        "config": cfg,
        "grid": cfg.get("grid"),
        "domain": cfg.get("domain"),
        "wall_clock_s": time.perf_counter() - started,
    }


def _run_flow(cfg, out_dir):
    """Shared flow driver: returns the RunResult and writes trace + frames."""
    topo, u0, law = _setup(cfg)
    params = build_flow_params(cfg)

    def snapshot(t_req, state, udot):
        label = f"{t_req:g}"
        runio.write_frame(udot, f"{out_dir}/frame_t{label}.pgm")

    result = flow.run(u0, law, topo, params, on_snapshot=snapshot)
    runio.write_csv(
        f"{out_dir}/trace.csv",
        [name for name, _ in result.trace.columns()],
        zip(*(vals for _, vals in result.trace.columns())),
    )
    return result


def cmd_flow(cfg, out_dir, started):
    summary = _base_summary(cfg, started)
    try:
        result = _run_flow(cfg, out_dir)
    except GCFlowError as exc:
        summary["error"] = _error_record(exc)
        summary["wall_clock_s"] = time.perf_counter() - started
        runio.write_summary(f"{out_dir}/summary.json", summary)
        return EXIT_NUMERICAL
    monitor = flow.max_principle_monitor(
        result.trace, transient_steps=build_flow_params(cfg).transient_steps
    )
    summary.update(
        {
            "final_time": result.state.t,
            "steps": result.state.step_count,
            "speed_flow": result.estimate.speed,
            "residual_sup": result.estimate.residual_sup,
            "converged": result.converged,
            "status": result.status,
            "monitors": {
                "max_principle": {
                    "baseline": monitor.baseline,
                    "max_increase": monitor.max_increase,
                    "violated": monitor.violated,
                }
            },
        }
    )
    summary["wall_clock_s"] = time.perf_counter() - started
    runio.write_summary(f"{out_dir}/summary.json", summary)
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def _run_translate(cfg):
    topo, u0, law = _setup(cfg)
    sec = _section(cfg, "elliptic")
    epsilons = _get(sec, "epsilons", required=True)
    if not isinstance(epsilons, (list, tuple)) or not epsilons:
        raise ConfigError("elliptic.epsilons must be a nonempty list")
    try:
        return elliptic.continue_speed(
            law,
            topo,
            u0,
            epsilons,
            tol=float(_get(sec, "tol", 1e-8)),
            warm_start=bool(_get(sec, "warm_start", True)),
            sigma=float(_get(sec, "sigma", 0.4)),
            max_steps=int(_get(sec, "max_steps", 2_000_000)),
            jump_every=int(_get(sec, "jump_every", 50)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_translate(cfg, out_dir, started):
    summary = _base_summary(cfg, started)
    try:
        cont = _run_translate(cfg)
    except GCFlowError as exc:
        summary["error"] = _error_record(exc)
        summary["wall_clock_s"] = time.perf_counter() - started
        runio.write_summary(f"{out_dir}/summary.json", summary)
        return EXIT_NUMERICAL
    runio.write_csv(
        f"{out_dir}/speeds.csv",
        ["epsilon", "v_epsilon"],
        zip(cont.epsilons, cont.speeds),
    )
    runio.write_frame(cont.final_field, f"{out_dir}/frame_profile.pgm")
    summary.update(
        {
            "epsilons": list(cont.epsilons),
            "speeds": list(cont.speeds),
            "speed_elliptic": cont.extrapolated_speed,
            "extrapolated": cont.extrapolated,
            "extrapolation_gap": cont.extrapolation_gap,
        }
    )
    summary["wall_clock_s"] = time.perf_counter() - started
    runio.write_summary(f"{out_dir}/summary.json", summary)
    return EXIT_OK


def _radial_setup(cfg):
    sec = _section(cfg, "radial")
    ksec = _section(sec, "kernel") if "kernel" in sec else {}
    variant = _get(ksec, "variant", "euclidean")
    n = int(_get(ksec, "n", 2))
    try:
        kernel = radial.RadialKernel(variant, n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    weight = _weight_from_config(_section(sec, "weight") if "weight" in sec else {}, n)
    return sec, kernel, weight


def cmd_radial(cfg, out_dir, started):
    summary = _base_summary(cfg, started)
    try:
        sec, kernel, weight = _radial_setup(cfg)
        R_list = _get(sec, "R_list", required=True)
        if not isinstance(R_list, (list, tuple)) or not R_list:
            raise ConfigError("radial.R_list must be a nonempty list")
        samples = int(_get(sec, "samples", 2048))
        verdict = radial.classify_entire(kernel, weight)
        summary["classification"] = verdict
        mass = radial.MassFunctions(kernel, weight)
        summary["rho_roots"] = {
            f"{R:g}": radial.rho_for_zero_speed(kernel, weight, R, mass=mass)
            for R in R_list
        }
        if verdict != radial.NO_ENTIRE:
            profiles = radial.entire_profile(kernel, weight, R_list, samples=samples)
            largest = profiles[-1]
            runio.write_csv(
                f"{out_dir}/profile.csv",
                ["r", "uprime", "u"],
                zip(largest.r, largest.uprime, largest.u),
            )
            summary["profile_R"] = largest.R
            summary["nesting_mismatch"] = (
                radial.nesting_mismatch(profiles) if len(profiles) > 1 else 0.0
            )
        surf = sec.get("speed_surface")
        if surf:
            Rs = np.linspace(*surf.get("R_range", [0.25, 2.0]), surf.get("n", 10))
            rho_hi = 0.95 if kernel.variant == "minkowski" else 3.0
            rhos = np.linspace(*surf.get("rho_range", [0.05, rho_hi]), surf.get("n", 10))
            summary["speed_surface"] = [
                [float(R), float(rho), radial.speed(kernel, weight, R, rho)]
                for R in Rs
                for rho in rhos
            ]
    except ConfigError:
        raise
    except GCFlowError as exc:
        summary["error"] = _error_record(exc)
        summary["wall_clock_s"] = time.perf_counter() - started
        runio.write_summary(f"{out_dir}/summary.json", summary)
        return EXIT_NUMERICAL
    summary["wall_clock_s"] = time.perf_counter() - started
    runio.write_summary(f"{out_dir}/summary.json", summary)
    return EXIT_OK


def _radial_compatible(cfg):
    """Flow/elliptic configurations that admit a radial cross-check:
    a disk domain, a graph law with a radial (constant-preset or absent)
    weight, and a radially symmetric initial value."""
    domain = _section(cfg, "domain")
    if domain.get("preset") != "disk":
        return False
    law = _section(cfg, "law")
    if law.get("kind") not in ("euclidean_graph", "minkowski_graph"):
        return False
    weight = law.get("weight")
    if weight is not None and weight.get("preset", "constant") != "constant":
        return False
    coeffs = _section(cfg, "initial").get("coeffs", {})
    radialish = {"const", "x2", "y2"}
    if any(c not in radialish and abs(v) > 0 for c, v in coeffs.items()):
        return False
    return coeffs.get("x2", 0.0) == coeffs.get("y2", 0.0)


def cmd_compare(cfg, out_dir, started):
    summary = _base_summary(cfg, started)
    for sub in ("flow", "elliptic"):
        sub_grid = _section(cfg, sub, required=False).get("grid")
        if sub_grid is not None and sub_grid != cfg.get("grid"):
            raise ConfigError(
                f"compare needs one shared grid; {sub}.grid differs from grid"
            )
    try:
        result = _run_flow(cfg, out_dir)
        cont = _run_translate(cfg)
    except GCFlowError as exc:
        summary["error"] = _error_record(exc)
        summary["wall_clock_s"] = time.perf_counter() - started
        runio.write_summary(f"{out_dir}/summary.json", summary)
        return EXIT_NUMERICAL
    runio.write_csv(
        f"{out_dir}/speeds.csv",
        ["epsilon", "v_epsilon"],
        zip(cont.epsilons, cont.speeds),
    )
    topo = result.estimate.profile.topology
    prof_flow = result.estimate.profile.values[topo.ii, topo.jj]
    prof_ell = cont.final_field.values[topo.ii, topo.jj]
    summary.update(
        {
            "speed_flow": result.estimate.speed,
            "speed_elliptic": cont.extrapolated_speed,
            "delta_speed_flow_elliptic": abs(
                result.estimate.speed - cont.extrapolated_speed
            ),
            "profile_sup_diff": float(np.max(np.abs(prof_flow - prof_ell))),
            "converged": result.converged,
            "status": result.status,
        }
    )
    if _radial_compatible(cfg):
        law_sec = _section(cfg, "law")
        n = int(law_sec.get("n", 2))
        variant = "euclidean" if law_sec["kind"] == "euclidean_graph" else "minkowski"
        kernel = radial.RadialKernel(variant, n)
        c = (law_sec.get("weight") or {}).get("c", 1.0)
        weight = radial.RadialWeight.constant(c)
        rho_hat = gradient_sup(result.state.u)
        R = float(_section(cfg, "domain")["radius"])
        v_rad = radial.speed(kernel, weight, R, rho_hat)
        summary.update(
            {
                "boundary_gradient": rho_hat,
                "speed_radial": v_rad,
                "delta_speed_flow_radial": abs(result.estimate.speed - v_rad),
                "delta_speed_elliptic_radial": abs(
                    cont.extrapolated_speed - v_rad
                ),
            }
        )
    summary["wall_clock_s"] = time.perf_counter() - started
    runio.write_summary(f"{out_dir}/summary.json", summary)
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


_COMMANDS = {
    "flow": cmd_flow,
    "translate": cmd_translate,
    "radial": cmd_radial,
    "compare": cmd_compare,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="gcflow",
        description="Curvature-flow laboratory: flow | translate | radial | compare",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON run configuration")
    args, extra = parser.parse_known_args(argv)

    started = time.perf_counter()
    try:
        cfg = runio.load_config(args.config)
        runio.apply_overrides(cfg, extra)
        out_dir = cfg.get("output_dir")
        if not out_dir or not isinstance(out_dir, str):
            raise ConfigError("config needs an output_dir string")
        with runio.run_dir_lock(out_dir):
            return _COMMANDS[args.command](cfg, out_dir, started)
    except ConfigError as exc:
        print(json.dumps({"error": _error_record(exc)}), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
