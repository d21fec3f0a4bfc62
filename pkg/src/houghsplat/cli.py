"""Command-line driver: ``houghsplat <command> ...``.

Every command exits 0 on success. Failures print one JSON object on stderr
(error type, message, and file/field when known) and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from importlib.resources import files
from pathlib import Path

import numpy as np

from ._util import to_jsonable
from .camera import load_cameras, save_cameras
from .clustering import BACKGROUND, ClusterParams, InstanceTable, cluster_scene
from .errors import ConfigError, FormatError, HoughSplatError
from .evaluation import ari, depth_spread, iou, m_acc, vote_error, write_metrics
from .io import read_pgm16, read_plane, write_pgm16, write_plane, write_png
from .losses import LossWeights
from .optimizer import TrainConfig, train
from .raster import BLEND_MODES, RENDER_MODES, render
from .scene import SyntheticSceneSpec, generate_synthetic_scene, load_scene, part_labels, save_scene
from .semantics import FeatureBank, PlaneFeatures, SyntheticFeatures, associate_features, pick, query
from .votemaps import LabelMask, VoteMap2D, build_vote_map, label_mask_from_scene

log = logging.getLogger("houghsplat")

PRESETS = ("three_spheres",)


class CliError(HoughSplatError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message, field="argv")


# ---------------------------------------------------------------------------
# file helpers


def _read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise CliError(f"no such file: {path}", file=str(path))
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", offset=exc.pos, file=str(path)) from None


def _load_spec(arg: str) -> SyntheticSceneSpec:
    if arg in PRESETS:
        data = json.loads(files("houghsplat").joinpath(f"presets/{arg}.json").read_text())
        where = f"preset {arg}"
    else:
        data = _read_json(arg)
        where = arg
    try:
        return SyntheticSceneSpec.from_dict(data)
    except HoughSplatError as exc:
        exc.file = where
        raise


def _view_files(directory, suffix: str) -> list:
    directory = Path(directory)
    if not directory.is_dir():
        raise CliError(f"no such directory: {directory}", file=str(directory))
    out = sorted(directory.glob(f"view_*{suffix}"))
    if not out:
        raise CliError(f"no view_*{suffix} files in {directory}", file=str(directory))
    return out


def _load_masks(directory, level: int = 0) -> list:
    return [LabelMask(read_pgm16(p), level=level) for p in _view_files(directory, ".pgm")]


def _load_vote_maps(directory) -> list:
    maps = []
    for p in _view_files(directory, ".vspl"):
        v = read_plane(p)
        if v.shape[2] != 2:
            raise FormatError(f"vote plane has {v.shape[2]} channels, expected 2", file=str(p))
        sup = np.isfinite(v[..., 0])
        maps.append(VoteMap2D(votes=v, supervised=sup, centroids={}))
    return maps


def _load_scene(path):
    if not Path(path).exists() and not Path(path).with_suffix(".json").exists():
        raise CliError(f"no such scene: {path}", file=str(path))
    return load_scene(path)


def _load_rig(path):
    if not Path(path).exists():
        raise CliError(f"no such file: {path}", file=str(path))
    return load_cameras(path)


def _parse_views(arg, n):
    if arg is None:
        return list(range(n))
    views = [int(v) for v in arg.split(",") if v.strip()]
    for v in views:
        if not 0 <= v < n:
            raise CliError(f"view {v} out of range (rig has {n} views)", field="--views")
    return views


# ---------------------------------------------------------------------------
# commands


def cmd_gen(args):
    spec = _load_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    scene = generate_synthetic_scene(spec)
    rig = spec.rig_spec().build()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_scene(scene, out / "scene.json")
    save_cameras(rig, out / "cameras.json")
    for level in range(scene.levels):
        labels = scene.labels if level == 0 else part_labels(scene, level)
        mdir = out / "masks" / f"l{level}"
        mdir.mkdir(parents=True, exist_ok=True)
        for k, view in enumerate(rig):
            write_pgm16(mdir / f"view_{k:03d}.pgm", label_mask_from_scene(scene, view, labels, level).labels)
    idir = out / "images"
    idir.mkdir(exist_ok=True)
    for k, view in enumerate(rig):
        color = render(scene, view, mode="color").color
        write_plane(idir / f"view_{k:03d}.vspl", color)
        write_png(idir / f"view_{k:03d}.png", color)
    print(json.dumps({"scene": str(out / "scene.json"), "gaussians": scene.n, "views": len(rig)}))


def cmd_render(args):
    scene = _load_scene(args.scene)
    rig = _load_rig(args.cameras)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    id_labels = None
    if args.mode in ("instance_ids", "all"):
        if args.table:
            id_labels = InstanceTable.load(args.table).gaussian_labels(scene.n)
            id_labels[id_labels < 0] = -1
        elif scene.cluster_ids is not None:
            id_labels = np.where(scene.cluster_ids < 0, -1, scene.cluster_ids)
        elif args.mode == "instance_ids":
            raise CliError("instance_ids needs --table or a clustered scene", field="--mode")
    for k in _parse_views(args.views, len(rig)):
        r = render(scene, rig[k], mode=args.mode, blend_mode=args.blend, level=args.level, id_labels=id_labels)
        stem = f"view_{k:03d}"
        write_plane(out / f"{stem}_color.vspl", r.color)
        write_png(out / f"{stem}_color.png", r.color)
        if r.vote3d is not None:
            write_plane(out / f"{stem}_vote3d.vspl", r.vote3d)
            write_plane(out / f"{stem}_vote2d.vspl", r.vote2d)
            counts = r.members.counts()
            depth = np.full(len(counts), np.nan)
            has = counts > 0
            sums = np.add.reduceat(r.depths, r.members.offsets[:-1][has]) if has.any() else np.zeros(0)
            depth[has] = sums / counts[has]
            write_plane(out / f"{stem}_depth.vspl", depth.reshape(r.height, r.width))
        if r.instance_ids is not None:
            write_plane(out / f"{stem}_ids.vspl", r.instance_ids.astype(np.float64))


def cmd_votes2d(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for p in _view_files(args.masks, ".pgm"):
        vm = build_vote_map(LabelMask(read_pgm16(p)), border_margin=args.border_margin)
        write_plane(out / f"{p.stem}.vspl", vm.votes)
        summary.append({"view": p.stem, "supervised": vm.count, "segments": sorted(int(k) for k in vm.centroids)})
    print(json.dumps(summary))


_TRAIN_SKIP = {"weights", "version"}


def _add_dataclass_flags(parser, cls, skip=()):
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        flag = "--" + f.name.replace("_", "-")
        default = f.default
        if isinstance(default, bool):
            parser.add_argument(flag, dest=f.name, type=lambda s: s.lower() in ("1", "true", "yes"), default=None, metavar="BOOL")
        elif isinstance(default, tuple):
            parser.add_argument(flag, dest=f.name, type=lambda s: tuple(t for t in s.split(",") if t), default=None, metavar="A,B")
        elif isinstance(default, int):
            parser.add_argument(flag, dest=f.name, type=int, default=None)
        elif isinstance(default, float) or default is None:
            parser.add_argument(flag, dest=f.name, type=float, default=None)
        else:
            parser.add_argument(flag, dest=f.name, type=str, default=None)


def train_config_from_args(args) -> TrainConfig:
    data = _read_json(args.config) if args.config else {}
    if not isinstance(data, dict):
        raise ConfigError("train config must be a JSON object", file=args.config)
    data = dict(data)
    weights = dict(data.pop("weights", None) or {})
    for f in dataclasses.fields(TrainConfig):
        if f.name in _TRAIN_SKIP:
            continue
        v = getattr(args, f.name, None)
        if v is not None:
            data[f.name] = v
    for f in dataclasses.fields(LossWeights):
        v = getattr(args, f.name, None)
        if v is not None:
            weights[f.name] = v
    if args.no_depth_loss:
        data["use_depth_loss"] = False
    if args.alpha_vote:
        data["blend_mode"] = "alpha"
    if args.project_first:
        data["blend_mode"] = "project_first"
    if args.use_transmittance_weights:
        data["depth_variant"] = "weighted"
    if args.raw_depth_sum:
        data["normalize_depth"] = False
    if weights:
        data["weights"] = weights
    try:
        return TrainConfig.from_dict(data)
    except HoughSplatError as exc:
        exc.file = exc.file or args.config
        raise


def cmd_train(args):
    config = train_config_from_args(args)
    scene = _load_scene(args.scene)
    rig = _load_rig(args.cameras)
    masks = vote_maps = None
    if args.vote_maps:
        vote_maps = _load_vote_maps(args.vote_maps)
    elif args.masks:
        masks = _load_masks(args.masks, config.level)
    else:
        raise CliError("train needs --masks or --vote-maps", field="--masks")
    n_sup = len(vote_maps) if vote_maps is not None else len(masks)
    if n_sup != len(rig):
        raise ConfigError(f"{n_sup} masks for {len(rig)} views", field="--masks")
    images = None
    if args.images:
        images = [read_plane(p) for p in _view_files(args.images, ".vspl")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "train_config.json").write_text(json.dumps(to_jsonable(config), indent=2, sort_keys=True) + "\n")
    ckpt = out / "checkpoints" if config.checkpoint_every else None
    result = train(scene, rig, masks, config, images=images, log_path=out / "loss.csv", checkpoint_dir=ckpt, vote_maps=vote_maps)
    save_scene(result.scene, out / "scene.json")
    last = result.history[-1]
    print(json.dumps({"scene": str(out / "scene.json"), "steps": config.steps, "final": to_jsonable(last)}))


def cmd_cluster(args):
    scene = _load_scene(args.scene)
    data = _read_json(args.params) if args.params else {}
    for name in ("eps", "min_pts", "background_eps", "level"):
        v = getattr(args, name)
        if v is not None:
            data[name] = v
    params = ClusterParams.from_dict(data)
    table = cluster_scene(scene, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table.save(out / "instances.json")
    labeled = scene.copy()
    labeled.cluster_ids = table.gaussian_labels(scene.n)
    save_scene(labeled, out / "scene.json")
    print(
        json.dumps(
            {
                "instances": len(table.instances),
                "noise": len(table.noise),
                "background": len(table.background),
                "table": str(out / "instances.json"),
            }
        )
    )


def _feature_source(args, n_views):
    if args.feature_planes:
        return PlaneFeatures(_view_files(args.feature_planes, ".vspl"))
    if not args.masks:
        raise CliError("associate needs --masks (synthetic features) or --feature-planes", field="--masks")
    masks = _load_masks(args.masks)
    return SyntheticFeatures(masks, dim=args.dim, seed=args.seed)


def cmd_associate(args):
    scene = _load_scene(args.scene)
    table = InstanceTable.load(args.table)
    rig = _load_rig(args.cameras)
    bank = associate_features(scene, table, rig, _feature_source(args, len(rig)))
    bank.save(args.out)
    if args.table_out:
        table.save(args.table_out)
    print(json.dumps({"features": len(bank.features), "missing": bank.missing, "dim": bank.dim}))


def _query_vector(args, bank):
    if args.instance is not None:
        if args.instance not in bank.features:
            raise CliError(f"instance {args.instance} has no feature", field="--instance")
        return bank.features[args.instance]
    if args.vector:
        return np.array([float(t) for t in args.vector.split(",")])
    if args.vector_file:
        return np.asarray(_read_json(args.vector_file), dtype=np.float64)
    raise CliError("query needs --vector, --vector-file or --instance", field="--vector")


def cmd_query(args):
    bank = FeatureBank.load(args.bank)
    scene = _load_scene(args.scene)
    table = InstanceTable.load(args.table)
    rig = _load_rig(args.cameras)
    result = query(bank, _query_vector(args, bank), scene, table, rig, threshold=args.threshold)
    print(f"{'rank':>4}  {'instance':>8}  {'score':>9}")
    for r, (k, s) in enumerate(result.ranking, 1):
        print(f"{r:>4}  {k:>8}  {s:>9.6f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for k, m in enumerate(result.masks):
            write_png(out / f"view_{k:03d}_selection.png", m)
        (out / "query.json").write_text(
            json.dumps(
                {"ranking": [[int(k), s] for k, s in result.ranking], "selected": [int(k) for k in result.selected]},
                indent=2,
            )
            + "\n"
        )


def cmd_pick(args):
    scene = _load_scene(args.scene)
    table = InstanceTable.load(args.table)
    rig = _load_rig(args.cameras)
    k = pick(scene, table, rig, args.view, (args.pixel[0], args.pixel[1]))
    print(json.dumps({"view": args.view, "pixel": list(args.pixel), "instance": k}))


def _retrieval_metrics(scene, table, rig, bank, masks):
    """Query every instance with its own feature; compare selections with the mask of its majority label."""
    ious, ranks, scores = [], [], []
    for k in table.ids():
        if k not in bank.features:
            continue
        res = query(bank, bank.features[k], scene, table, rig)
        ranks.append(1 + [r[0] for r in res.ranking].index(k))
        scores.append(dict(res.ranking)[k])
        gt_lab = scene.labels[table.instances[k].gaussian_ids]
        gt_lab = gt_lab[gt_lab >= 0]
        if len(gt_lab) == 0:
            continue
        g = int(np.bincount(gt_lab).argmax()) + 1
        ious.append(float(np.mean([iou(m, mk.labels == g) for m, mk in zip(res.masks, masks)])))
    return {
        "query_ious": ious,
        "miou": float(np.mean(ious)) if ious else None,
        "macc_025": m_acc(ious) if ious else None,
        "self_rank": ranks,
        "self_score": scores,
    }


def evaluate(scene, table, rig=None, bank=None, masks=None) -> dict:
    """Metrics of a clustered, trained synthetic scene against its generator ground truth."""
    labels = table.gaussian_labels(scene.n)
    fg = scene.labels >= 0
    bg_expected = np.flatnonzero(~fg)
    metrics = {
        "ari": ari(scene.labels[fg], labels[fg]) if fg.any() else None,
        "instances": len(table.instances),
        "noise": len(table.noise),
        "background": len(table.background),
        "background_filtered": float(np.mean(labels[bg_expected] == BACKGROUND)) if len(bg_expected) else 1.0,
    }
    centroids = scene.instance_centroids()
    if centroids:
        rep = vote_error(scene, centroids, scene.instance_radii(), level=table.level, rig=rig)
        metrics["vote_error"] = rep.to_dict()
    elif rig is not None:
        metrics["depth_spread"] = depth_spread(scene, rig, labels, table.level)[0]
    if bank is not None and rig is not None and masks is not None:
        metrics["retrieval"] = _retrieval_metrics(scene, table, rig, bank, masks)
    return metrics


def cmd_eval(args):
    scene = _load_scene(args.scene)
    table = InstanceTable.load(args.table)
    rig = _load_rig(args.cameras) if args.cameras else None
    bank = FeatureBank.load(args.bank) if args.bank else None
    masks = _load_masks(args.masks) if args.masks else None
    metrics = evaluate(scene, table, rig, bank, masks)
    write_metrics(args.out, metrics)
    print(json.dumps({"metrics": str(args.out), "ari": metrics["ari"]}))


ABLATION_ARMS = {
    "full": {},
    "no_depth_loss": {"use_depth_loss": False},
    "alpha_vote": {"blend_mode": "alpha"},
    "transmittance_weights": {"depth_variant": "weighted"},
    "project_first": {"blend_mode": "project_first"},
}


def run_ablation(spec: SyntheticSceneSpec, base: dict, arms) -> list:
    """Train each arm from a freshly generated scene and report vote and depth statistics."""
    rows = []
    for name in arms:
        if name not in ABLATION_ARMS:
            raise ConfigError(f"unknown ablation arm {name!r}", field="--arms")
        scene = generate_synthetic_scene(spec)
        rig = spec.rig_spec().build()
        masks = [label_mask_from_scene(scene, v) for v in rig]
        config = TrainConfig.from_dict({**base, **ABLATION_ARMS[name]})
        trained = train(scene, rig, masks, config).scene
        rep = vote_error(trained, scene.instance_centroids(), scene.instance_radii(), rig=rig)
        pix_err = []
        for view in rig:
            r = render(trained, view, mode="votes", blend_mode=config.blend_mode)
            c = np.array([scene.instance_centroids()[k] for k in sorted(scene.instance_centroids())])
            ids = label_mask_from_scene(scene, view).labels - 1
            sel = (ids >= 0) & np.isfinite(r.vote3d[..., 0])
            if sel.any():
                pix_err.append(float(np.linalg.norm(r.vote3d[sel] - c[ids[sel]], axis=1).mean()))
        rows.append(
            {
                "arm": name,
                "within_0.1r": rep.overall_within,
                "mean_vote_error": float(np.mean(list(rep.mean_error.values()))),
                "pixel_vote3d_error": float(np.mean(pix_err)) if pix_err else float("nan"),
                "depth_spread": rep.depth_spread,
            }
        )
    return rows


def cmd_ablate(args):
    spec = _load_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    base = _read_json(args.config) if args.config else {}
    if args.steps is not None:
        base["steps"] = args.steps
    arms = [a for a in args.arms.split(",") if a]
    rows = run_ablation(spec, base, arms)
    cols = list(rows[0])
    print("  ".join(f"{c:>20}" for c in cols))
    for row in rows:
        print("  ".join(f"{row[c]:>20.6f}" if isinstance(row[c], float) else f"{row[c]:>20}" for c in cols))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "ablation.csv").open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            w.writerows(rows)
        write_metrics(out / "ablation.json", {"arms": rows})


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="houghsplat", description="Hough voting on Gaussian splats: train, cluster, query.")
    p.add_argument("--threads", type=int, default=None, help="cap on numba worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="synthetic scene + cameras + label masks from a spec JSON or preset name")
    g.add_argument("spec", help=f"spec JSON path or preset ({', '.join(PRESETS)})")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("render", help="color / vote / id / depth planes")
    r.add_argument("scene")
    r.add_argument("cameras")
    r.add_argument("--out", required=True)
    r.add_argument("--mode", choices=RENDER_MODES, default="all")
    r.add_argument("--blend", choices=BLEND_MODES, default="uniform")
    r.add_argument("--level", type=int, default=0)
    r.add_argument("--views", help="comma-separated view indices (default all)")
    r.add_argument("--table", help="instance table for the id planes")
    r.set_defaults(func=cmd_render)

    v = sub.add_parser("votes2d", help="label masks -> 2D vote maps")
    v.add_argument("masks", help="directory of view_*.pgm")
    v.add_argument("--out", required=True)
    v.add_argument("--border-margin", type=int, default=1)
    v.set_defaults(func=cmd_votes2d)

    t = sub.add_parser("train", help="optimize offsets (and optionally appearance)")
    t.add_argument("scene")
    t.add_argument("cameras")
    t.add_argument("--masks", help="directory of view_*.pgm at the training level")
    t.add_argument("--vote-maps", help="directory of cached view_*.vspl vote maps")
    t.add_argument("--images", help="directory of view_*.vspl ground-truth color planes")
    t.add_argument("--config", help="train config JSON")
    t.add_argument("--out", required=True)
    t.add_argument("--no-depth-loss", action="store_true")
    t.add_argument("--alpha-vote", action="store_true", help="blend votes with alpha*T weights over all contributors")
    t.add_argument("--project-first", action="store_true", help="diagnostic: project member votes, then average")
    t.add_argument("--use-transmittance-weights", action="store_true", help="weighted depth distortion")
    t.add_argument("--raw-depth-sum", action="store_true", help="no per-pixel pair-count normalization of the depth term")
    _add_dataclass_flags(t, TrainConfig, skip=_TRAIN_SKIP)
    _add_dataclass_flags(t, LossWeights)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("cluster", help="background filter + DBSCAN -> instance table")
    c.add_argument("scene")
    c.add_argument("--out", required=True)
    c.add_argument("--params", help="cluster params JSON")
    c.add_argument("--eps", type=float)
    c.add_argument("--min-pts", dest="min_pts", type=int)
    c.add_argument("--background-eps", dest="background_eps", type=float)
    c.add_argument("--level", type=int)
    c.set_defaults(func=cmd_cluster)

    a = sub.add_parser("associate", help="instance features from rendered id maps")
    a.add_argument("scene")
    a.add_argument("table")
    a.add_argument("cameras")
    a.add_argument("--masks", help="label masks for the synthetic feature source")
    a.add_argument("--feature-planes", help="directory of view_*.vspl (H, W, D) features")
    a.add_argument("--dim", type=int, default=16)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True, help="feature bank JSON")
    a.add_argument("--table-out", help="also write the table with features attached")
    a.set_defaults(func=cmd_associate)

    q = sub.add_parser("query", help="rank instances by cosine similarity and render the selection")
    q.add_argument("bank")
    q.add_argument("scene")
    q.add_argument("table")
    q.add_argument("cameras")
    q.add_argument("--vector", help="comma-separated query vector")
    q.add_argument("--vector-file", help="JSON array query vector")
    q.add_argument("--instance", type=int, help="query with this instance's own feature")
    q.add_argument("--threshold", type=float, help="select every instance scoring above this")
    q.add_argument("--out", help="directory for selection masks")
    q.set_defaults(func=cmd_query)

    k = sub.add_parser("pick", help="instance under a pixel")
    k.add_argument("scene")
    k.add_argument("table")
    k.add_argument("cameras")
    k.add_argument("--view", type=int, required=True)
    k.add_argument("--pixel", type=int, nargs=2, required=True, metavar=("U", "V"))
    k.set_defaults(func=cmd_pick)

    e = sub.add_parser("eval", help="metrics JSON against generator ground truth")
    e.add_argument("scene", help="trained scene (carries ground-truth labels and centroids)")
    e.add_argument("table")
    e.add_argument("--cameras")
    e.add_argument("--bank")
    e.add_argument("--masks")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("ablate", help="paired training runs, one fresh scene per arm")
    b.add_argument("spec")
    b.add_argument("--arms", default="full,no_depth_loss,alpha_vote")
    b.add_argument("--config", help="base train config JSON")
    b.add_argument("--steps", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--out")
    b.set_defaults(func=cmd_ablate)
    return p


def _report(exc: Exception) -> None:
    if isinstance(exc, HoughSplatError):
        payload = exc.to_dict()
    elif isinstance(exc, OSError):
        payload = {"error": type(exc).__name__, "message": exc.strerror or str(exc)}
        if exc.filename:
            payload["file"] = str(exc.filename)
    else:
        payload = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(payload) + "\n")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        if args.threads is not None:
            import numba

            if args.threads < 1:
                raise CliError("--threads must be >= 1", field="--threads")
            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        args.func(args)
    except (HoughSplatError, OSError, ValueError) as exc:
        _report(exc)
        return 2 if isinstance(exc, CliError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
