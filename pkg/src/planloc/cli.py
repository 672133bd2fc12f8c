"""Command-line pipeline: fetch, rasterize, encode, localize, fuse, synth,
eval, heatmap.

Every command is deterministic given its inputs and seeds. Pipeline
errors exit with status 1 and the underlying message on stderr; argparse
usage errors exit with status 2.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import bev as bevmod
from . import formats, fusion, infer, matcher, metrics, synth
from .config import load_config
from .errors import DomainError, FormatError, PlanlocError
from .geometry import Datum, GridSpec, Pose2
from .mapenc import (
    NeuralMap,
    embed_classes,
    encode_analytic,
    load_neural_map,
    random_embeddings,
    save_neural_map,
)
from .osm.geoms import build_geometries
from .osm.overpass import fetch_overpass
from .osm.parse import parse_osm_xml
from .raster import load_tile, rasterize, save_tile
from .volumes import PoseVolume


def _parse_floats(text, count, what):
    parts = text.split(",")
    if len(parts) != count:
        raise DomainError(f"{what} needs {count} comma-separated numbers, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise DomainError(f"{what}: cannot parse {text!r}") from exc


def _pose_record(post: PoseVolume) -> dict:
    pose, prob = infer.argmax_pose(post)
    record = {
        "x": pose.x,
        "y": pose.y,
        "theta": pose.theta,
        "probability": prob,
        "modes": [
            {"x": m.x, "y": m.y, "theta": m.theta, "probability": p}
            for m, p in infer.local_modes(post, top_k=3)
        ],
    }
    try:
        record["covariance"] = infer.covariance(post, pose).tolist()
    except DomainError:
        record["covariance"] = None
    return record


def _load_observation(path, cfg):
    """Load a BEV directly or lift column features into one (magic-sniffed)."""
    with open(path, "rb") as f:
        magic = f.read(4)
    if magic == formats.MAGIC_BEV:
        return bevmod.BevGrid.load(path)
    if magic == formats.MAGIC_COLUMN_FEATURES:
        cols = bevmod.ColumnFeatures.load(path)
        bins = bevmod.ScaleBins(cfg.bev.sigma_min, cfg.bev.sigma_max, cfg.bev.s)
        polar = bevmod.lift_polar(cols, bins, cfg.bev.delta, cfg.bev.d)
        return bevmod.polar_to_cartesian(polar, cols, cfg.bev.delta, cfg.bev.l)
    raise FormatError(f"{path}: neither a BEV nor a column-features file")


def _encode_tile(raster, cfg) -> NeuralMap:
    counts = (
        cfg.table.class_count("area"),
        cfg.table.class_count("line"),
        cfg.table.class_count("node"),
    )
    emb = random_embeddings(counts, cfg.encoder.n, seed=cfg.encoder.seed)
    embedded = embed_classes(raster, emb)
    return encode_analytic(embedded, raster, params=cfg.encoder, table=cfg.table)


def cmd_fetch(args, cfg):
    bbox = _parse_floats(args.bbox, 4, "bbox")
    data = fetch_overpass(tuple(bbox), endpoint=args.endpoint, cache_dir=args.cache_dir)
    with open(args.out, "wb") as f:
        f.write(data)
    print(f"wrote {args.out} ({len(data)} bytes)")


def cmd_rasterize(args, cfg):
    with open(args.osm, "rb") as f:
        graph = parse_osm_xml(f.read())
    if not graph.nodes:
        raise DomainError(f"{args.osm} contains no nodes")
    lons = [n.lon for n in graph.nodes.values()]
    lats = [n.lat for n in graph.nodes.values()]
    datum = Datum(sum(lons) / len(lons), sum(lats) / len(lats))
    geoms = build_geometries(graph, datum, cfg.table)
    cells = int(round(args.size / args.gsd))
    half = args.size / 2.0
    spec = GridSpec(-half + args.gsd / 2.0, -half + args.gsd / 2.0, args.gsd, cells, cells)
    raster = rasterize(geoms, spec, class_table_hash=cfg.table.digest(), datum=datum)
    save_tile(raster, args.out)
    print(f"wrote {args.out} digest {raster.digest()}")


def cmd_encode(args, cfg):
    raster = load_tile(args.tile, expect_class_hash=cfg.table.digest())
    nmap = _encode_tile(raster, cfg)
    save_neural_map(nmap, args.out)
    print(f"wrote {args.out} ({nmap.n} channels)")


def cmd_localize(args, cfg):
    nmap = load_neural_map(args.map)
    obs = _load_observation(args.observation, cfg)
    M = matcher.score_volume(nmap, obs, args.k, backend=args.backend, threads=args.threads)
    prior_center = prior_radius = None
    if args.prior is not None:
        px, py = _parse_floats(args.prior, 2, "--prior")
        if args.radius is None:
            raise DomainError("--prior requires --radius")
        prior_center = Pose2(px, py, 0.0)
        prior_radius = args.radius
    post = matcher.pose_posterior(M, nmap.omega, prior_center, prior_radius)
    post.save(args.out)
    print(json.dumps(_pose_record(post), sort_keys=True))


def cmd_fuse(args, cfg):
    frames = fusion.load_trajectory(args.trajectory)
    if not frames:
        raise DomainError(f"{args.trajectory} lists no frames")
    base = os.path.dirname(os.path.abspath(args.trajectory))
    volumes = []
    for fr in frames:
        path = fr.volume_path
        if not os.path.isabs(path):
            path = os.path.join(base, path)
        volumes.append(PoseVolume.load(path))
    rels = fusion.reference_rels(frames)
    fused = fusion.fuse_views(volumes, rels)
    fused.save(args.out)
    print(json.dumps(_pose_record(fused), sort_keys=True))


def cmd_synth(args, cfg):
    os.makedirs(args.out, exist_ok=True)
    geoms, raster = synth.gen_world(args.seed, cfg.world, table=cfg.table)
    tile_path = os.path.join(args.out, "world.pltl")
    save_tile(raster, tile_path)
    nmap = _encode_tile(raster, cfg)
    map_path = os.path.join(args.out, "map.plnm")
    save_neural_map(nmap, map_path)

    rng = np.random.default_rng(args.seed)
    margin = cfg.bev.d * cfg.bev.delta + 2.0
    half = cfg.world.extent_m / 2.0 - margin
    gt_lines = []
    for idx in range(args.observations):
        gt = Pose2(
            rng.uniform(-half, half),
            rng.uniform(-half, half),
            rng.uniform(-math.pi, math.pi),
        )
        obs = synth.render_observation(
            nmap, gt, (cfg.bev.l, cfg.bev.d), cfg.bev.delta,
            noise=cfg.noise, seed=args.seed * 1000 + idx,
        )
        name = f"obs_{idx:03d}.plbv"
        obs.save(os.path.join(args.out, name))
        gt_lines.append(f"{name} {gt.x!r} {gt.y!r} {gt.theta!r}")
    with open(os.path.join(args.out, "gt.txt"), "w") as f:
        f.write("# observation_file x y theta\n")
        f.write("\n".join(gt_lines) + "\n")
    print(f"wrote {args.out}: world tile, map, {args.observations} observations")


def _read_gt(path):
    records = []
    with open(path) as f:
        for line in f:
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            name, x, y, theta = body.split()
            records.append((name, Pose2(float(x), float(y), float(theta))))
    return records


def cmd_eval(args, cfg):
    map_path = os.path.join(args.scenario, "map.plnm")
    gt_path = os.path.join(args.scenario, "gt.txt")
    if not (os.path.exists(map_path) and os.path.exists(gt_path)):
        raise DomainError(f"{args.scenario} is not a synth scenario (map.plnm/gt.txt missing)")
    nmap = load_neural_map(map_path)
    trials = []
    for name, gt in _read_gt(gt_path):
        obs = bevmod.BevGrid.load(os.path.join(args.scenario, name))
        M = matcher.score_volume(nmap, obs, args.k, backend=args.backend, threads=args.threads)
        post = matcher.pose_posterior(M, nmap.omega)
        est, _ = infer.argmax_pose(post)
        trials.append((name, metrics.pose_errors(est, gt)))
    recall = metrics.recall_table([e for _, e in trials])
    metrics.write_report(args.out, trials, recall)
    print(json.dumps({"count": len(trials), "recall_pct": recall}, sort_keys=True))


def cmd_heatmap(args, cfg):
    from PIL import Image

    vol = PoseVolume.load(args.volume)
    marginal = vol.values.sum(axis=2)
    top = float(marginal.max())
    if top > 0.0:
        img = np.round(marginal * (255.0 / top)).astype(np.uint8)
    else:
        img = np.zeros(marginal.shape, dtype=np.uint8)
    Image.fromarray(np.flipud(img), mode="L").save(args.out, format="PNG")
    print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="planloc",
        description="Plan-view localization: match camera BEV features against map rasters.",
    )
    p.add_argument("--config", help="INI config file", default=None)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("fetch", help="download OSM data for a bbox (cached)")
    q.add_argument("bbox", help="min_lon,min_lat,max_lon,max_lat in degrees")
    q.add_argument("--out", required=True)
    q.add_argument("--cache-dir", default=None)
    q.add_argument("--endpoint", default=None)
    q.set_defaults(func=cmd_fetch)

    q = sub.add_parser("rasterize", help="OSM XML -> class-index tile")
    q.add_argument("osm")
    q.add_argument("--gsd", type=float, default=0.5, help="meters per cell")
    q.add_argument("--size", type=float, default=128.0, help="tile edge in meters")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_rasterize)

    q = sub.add_parser("encode", help="tile -> feature map with location prior")
    q.add_argument("tile")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_encode)

    q = sub.add_parser("localize", help="observation + map -> pose posterior")
    q.add_argument("map")
    q.add_argument("observation", help="BEV (.plbv) or column features (.plcf)")
    q.add_argument("--k", type=int, default=512, help="rotation bins")
    q.add_argument("--backend", choices=("fourier", "naive"), default="fourier")
    q.add_argument("--threads", type=int, default=1)
    q.add_argument("--prior", default=None, help="x,y meters")
    q.add_argument("--radius", type=float, default=None, help="prior radius, meters")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_localize)

    q = sub.add_parser("fuse", help="fuse a trajectory of posterior volumes")
    q.add_argument("trajectory", help="text file: frame_id dx dy dtheta volume_path")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_fuse)

    q = sub.add_parser("synth", help="generate a synthetic world + observations")
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--observations", type=int, default=4)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_synth)

    q = sub.add_parser("eval", help="localize a synth scenario and report recall")
    q.add_argument("scenario", help="directory produced by synth")
    q.add_argument("--k", type=int, default=64)
    q.add_argument("--backend", choices=("fourier", "naive"), default="fourier")
    q.add_argument("--threads", type=int, default=1)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_eval)

    q = sub.add_parser("heatmap", help="volume -> grayscale theta-marginal image")
    q.add_argument("volume")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_heatmap)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except (PlanlocError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
