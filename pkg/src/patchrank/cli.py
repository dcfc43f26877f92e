"""Command-line entry point: ``patchrank <command> ...``."""
import json
import logging
from pathlib import Path

import click
import numpy as np

from patchrank import io
from patchrank.errors import ParameterError, PatchRankError
from patchrank.features import BoundingBox
from patchrank.metrics import eval_pr_sr
from patchrank.model import Params, RankingInstance
from patchrank.solver import MODES, solve
from patchrank.synth import SyntheticSpec, gen_instance, gen_sequence
from patchrank.tracker import TrackerConfig, track


def _parse_params(items):
    out = {}
    for item in items:
        if "=" not in item:
            raise click.BadParameter(f"expected name=value, got {item!r}", param_hint="--param")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _split_overrides(overrides, params, cfg=None):
    """Route ``name=value`` overrides to the ranking params or the tracker config."""
    p_fields = set(params.to_dict()) | {"lam"}
    p_upd = {k: v for k, v in overrides.items() if k in p_fields}
    rest = {k: v for k, v in overrides.items() if k not in p_fields}
    try:
        params = params.override(**p_upd)
        if cfg is not None:
            cfg = cfg.override(**rest)
        elif rest:
            raise ParameterError(f"unknown parameter(s): {', '.join(sorted(rest))}")
    except (ParameterError, TypeError, ValueError) as exc:
        raise click.BadParameter(str(exc), param_hint="--param") from exc
    return params, cfg


param_option = click.option("--param", "params", multiple=True, metavar="NAME=VALUE",
                            help="Override a hyperparameter; repeatable.")


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command("solve")
@click.option("--instance", "instance_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(MODES), default="full", show_default=True)
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False))
@click.option("--weights", "weights_path", type=click.Path(dir_okay=False))
@param_option
def solve_cmd(instance_path, mode, trace_path, weights_path, params):
    """Solve one ranking instance stored as JSON."""
    inst = RankingInstance.from_json(Path(instance_path).read_text())
    prm, _ = _split_overrides(_parse_params(params), inst.params)
    try:
        res = solve(inst.replace(params=prm), mode)
    except PatchRankError as exc:
        raise click.ClickException(str(exc)) from exc
    if trace_path:
        res.write_trace(trace_path)
    payload = {"v": res.v.tolist(), "w": res.w.tolist(), "b": res.b,
               "iterations": res.iterations, "converged": res.converged}
    if weights_path:
        Path(weights_path).write_text(json.dumps(payload))
    last = res.trace[-1]
    click.echo(f"iterations={res.iterations} converged={res.converged} objective={last['objective']:.6g} "
               f"residuals={max(last[k] for k in ('r1', 'r2', 'r3', 'r4')):.3g}")


@main.command("track")
@click.option("--frames", "frames_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--init", "init", help="Initial box 'x,y,w,h'; default: first line of DIR/groundtruth.txt.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--heatmaps", "heat_dir", type=click.Path(file_okay=False))
@param_option
def track_cmd(frames_dir, init, out_path, heat_dir, params):
    """Track a target through a directory of PPM frames."""
    prm, cfg = _split_overrides(_parse_params(params), Params(), TrackerConfig())
    if init:
        box = BoundingBox.parse(init)
    else:
        gt_file = Path(frames_dir) / "groundtruth.txt"
        if not gt_file.exists():
            raise click.UsageError("--init is required when DIR/groundtruth.txt is absent")
        box = io.read_boxes(gt_file)[0]
    paths = io.list_frames(frames_dir)
    try:
        traj = track((io.read_ppm(p) for p in paths), box, prm, cfg)
    except PatchRankError as exc:
        raise click.ClickException(str(exc)) from exc
    io.write_boxes(out_path, traj.boxes, traj.confidences)
    if heat_dir:
        Path(heat_dir).mkdir(parents=True, exist_ok=True)
        for p, rec in zip(paths, traj.records):
            io.write_pgm(Path(heat_dir) / (p.stem + ".pgm"), io.weight_map_image(rec.weights))
    lost = sum(r.lost for r in traj.records)
    click.echo(f"frames={len(traj)} lost={lost} out={out_path}")


@main.command("synth-instance")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n", type=int, default=32, show_default=True)
@click.option("--p", type=int, default=8, show_default=True)
@click.option("--clusters", type=int, default=2, show_default=True)
@click.option("--separation", type=float, default=3.0, show_default=True)
@click.option("--corruption", type=float, default=0.0, show_default=True)
@click.option("--edge-noise", type=float, default=0.0, show_default=True)
@click.option("--layout", type=click.Choice(["block", "random"]), default="block", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--labels", "labels_path", type=click.Path(dir_okay=False),
              help="Also write the ground-truth labels as JSON.")
@param_option
def synth_instance_cmd(seed, n, p, clusters, separation, corruption, edge_noise, layout, out_path,
                       labels_path, params):
    """Generate a synthetic ranking instance."""
    prm, _ = _split_overrides(_parse_params(params), Params())
    spec = SyntheticSpec(seed=seed, n=n, p=p, clusters=clusters, separation=separation,
                         corruption_fraction=corruption, edge_noise=edge_noise, layout=layout)
    try:
        inst, labels = gen_instance(spec, prm)
    except PatchRankError as exc:
        raise click.ClickException(str(exc)) from exc
    Path(out_path).write_text(inst.to_json())
    if labels_path:
        Path(labels_path).write_text(json.dumps(labels.astype(int).tolist()))
    click.echo(f"wrote {out_path} (n={inst.n}, p={inst.p}, queries={int(inst.y.sum())})")


@main.command("synth-seq")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--frames", type=int, default=50, show_default=True)
@click.option("--motion", type=float, default=2.0, show_default=True)
@click.option("--size", "target_size", type=int, default=32, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def synth_seq_cmd(seed, frames, motion, target_size, out_dir):
    """Generate a synthetic sequence: PPM frames plus groundtruth.txt."""
    spec = SyntheticSpec(seed=seed, frames=frames, motion=motion, target_size=target_size)
    try:
        imgs, boxes = gen_sequence(spec)
    except PatchRankError as exc:
        raise click.ClickException(str(exc)) from exc
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(len(imgs))))
    for i, img in enumerate(imgs, start=1):
        io.write_ppm(out / f"{i:0{width}d}.ppm", img)
    io.write_boxes(out / "groundtruth.txt", boxes)
    click.echo(f"wrote {len(imgs)} frames to {out}")


@main.command("eval")
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True, dir_okay=False))
def eval_cmd(pred_path, gt_path):
    """Precision at 20 px and success-curve AUC of a trajectory."""
    try:
        pr, sr = eval_pr_sr(io.read_boxes(pred_path), io.read_boxes(gt_path))
    except PatchRankError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"PR@20={pr:.4f} SR_AUC={sr:.4f}")


if __name__ == "__main__":
    main()
