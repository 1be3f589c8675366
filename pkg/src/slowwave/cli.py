"""Pipeline orchestration: detect -> flow -> decompose -> features -> embed.

Every stage reads and writes plain files under the output root and
records them in manifest.json with content hashes, so stages can be
rerun independently and reruns with the same seed are byte-identical.
"""

import argparse
import csv
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import gmm as gmm_mod
from . import vae as vae_mod
from .errors import MissingUpstream, SlowwaveError
from .features import (
    FeatureConfig,
    build_feature_vector,
    divergence_free_part,
)
from .flow import FlowField, FlowSequence, HsConfig, horn_schunck
from .helmholtz import SolverConfig, decompose
from .npyio import Manifest, load_aux, load_mask, load_stack, save_array, save_json
from .plots import heatmap_png, manifold_png, quiver_png, scatter_png, trace_panel_png
from .signal import (
    BaselineSpec,
    Recording,
    SegmentConfig,
    bandstop_filter,
    compute_dff,
    detrend,
    exclude_events,
    extract_event,
    segment_events,
    spatial_mean,
)
from . import synth as synth_mod

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


class ConfigError(SlowwaveError):
    pass


def load_config(path, overrides=None):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    cfg = json.loads(path.read_text())
    cfg.setdefault("seed", 0)
    cfg["_dir"] = path.parent
    if overrides:
        cfg.update({k: v for k, v in overrides.items() if v is not None})
    out = cfg.get("output_dir") or os.environ.get("SLOWWAVE_OUT")
    if not out:
        raise ConfigError("no output_dir in config and SLOWWAVE_OUT unset")
    cfg["output_dir"] = Path(out) if Path(out).is_absolute() else cfg["_dir"] / out
    if not cfg.get("recordings"):
        raise ConfigError("config lists no recordings")
    return cfg


def _resolve(cfg, p):
    p = Path(p)
    return p if p.is_absolute() else cfg["_dir"] / p


def _segment_cfg(cfg):
    return SegmentConfig(**cfg.get("segment", {}))


def _load_recording(cfg, entry):
    stack, fs = load_stack(_resolve(cfg, entry["stack"]))
    fs = entry.get("fs", fs)
    if fs is None:
        raise ConfigError(f"no sampling rate for {entry['stack']}")
    aux = load_aux(_resolve(cfg, entry["aux"])) if entry.get("aux") else None
    return Recording(
        frames=stack,
        fs=float(fs),
        mask_left=load_mask(_resolve(cfg, entry["mask_left"])),
        mask_right=load_mask(_resolve(cfg, entry["mask_right"])),
        condition=entry.get("condition", ""),
        aux=aux,
    )


# ---------------------------------------------------------------- detect

def cmd_detect(cfg):
    out = Path(cfg["output_dir"])
    manifest = Manifest(out)
    seg_cfg = _segment_cfg(cfg)
    base_spec = BaselineSpec(**cfg.get("baseline", {}))
    excl = cfg.get("exclude", {})

    failures = 0
    for r, entry in enumerate(cfg["recordings"]):
        try:
            rec = _load_recording(cfg, entry)
            dff = compute_dff(rec, base_spec)
            trace = spatial_mean(dff, rec.mask)
            trace = bandstop_filter(trace, rec.fs, tuple(seg_cfg.band))
            trace = detrend(trace)
            windows = segment_events(trace, rec.fs, seg_cfg)
            events = [extract_event(rec, a, b, seg_cfg) for a, b in windows]
            events = exclude_events(
                events, rec.aux,
                min_amplitude=excl.get("min_amplitude", 0.05),
                max_aux_corr=excl.get("max_aux_corr", 0.3),
            )

            records = []
            for k, ev in enumerate(events):
                event_id = f"rec{r:03d}_ev{k:02d}"
                dff_path = out / "events" / f"{event_id}_dffw.npy"
                save_array(dff_path, ev.dffw.astype(np.float64))
                manifest.add(dff_path)
                records.append({
                    "event_id": event_id,
                    "onset_frame": ev.onset_frame,
                    "offset_frame": ev.offset_frame,
                    "duration_s": ev.duration_s,
                    "peak_amplitude": ev.peak_amplitude,
                    "mean_trace": [float(x) for x in ev.mean_trace],
                    "dffw": f"events/{event_id}_dffw.npy",
                })
            rec_json = out / "events" / f"rec{r:03d}.json"
            save_json(rec_json, {
                "recording": str(entry["stack"]),
                "condition": rec.condition,
                "fs": rec.fs,
                "events": records,
            })
            manifest.add(rec_json)
        except Exception:
            failures += 1
            print(f"detect: recording {r} failed", file=sys.stderr)
            traceback.print_exc()
    manifest.write()
    return EXIT_PARTIAL if failures else EXIT_OK


def _iter_events(cfg):
    """Yield (r, entry, rec_meta, event record) across all detected events."""
    out = Path(cfg["output_dir"])
    for r, entry in enumerate(cfg["recordings"]):
        rec_json = out / "events" / f"rec{r:03d}.json"
        if not rec_json.exists():
            raise MissingUpstream(f"{rec_json} missing; run detect first")
        meta = json.loads(rec_json.read_text())
        for ev in meta["events"]:
            yield r, entry, meta, ev


# ------------------------------------------------------------------ flow

def cmd_flow(cfg):
    out = Path(cfg["output_dir"])
    manifest = Manifest(out)
    hs_cfg = HsConfig(**cfg.get("hs", {}))

    for r, entry, meta, ev in _iter_events(cfg):
        masks = {
            "left": load_mask(_resolve(cfg, entry["mask_left"])),
            "right": load_mask(_resolve(cfg, entry["mask_right"])),
        }
        dffw = np.load(out / ev["dffw"])
        for side, mask in masks.items():
            us, vs = [], []
            for t in range(dffw.shape[0] - 1):
                f = horn_schunck(dffw[t], dffw[t + 1], mask, hs_cfg)
                us.append(f.u)
                vs.append(f.v)
            for name, arr in (("u", us), ("v", vs)):
                p = out / "flow" / f"{ev['event_id']}_{side}_{name}.npy"
                save_array(p, np.array(arr))
                manifest.add(p)
        meta_path = out / "flow" / f"{ev['event_id']}_meta.json"
        save_json(meta_path, {"alpha": hs_cfg.alpha, "max_iters": hs_cfg.max_iters,
                              "tol": hs_cfg.tol})
        manifest.add(meta_path)
    manifest.write()
    return EXIT_OK


def _load_flow_fields(cfg, ev, entry):
    out = Path(cfg["output_dir"])
    fields = {}
    for side in ("left", "right"):
        pu = out / "flow" / f"{ev['event_id']}_{side}_u.npy"
        pv = out / "flow" / f"{ev['event_id']}_{side}_v.npy"
        if not pu.exists():
            raise MissingUpstream(f"{pu} missing; run flow first")
        mask = load_mask(_resolve(cfg, entry[f"mask_{side}"]))
        fields[side] = (np.load(pu), np.load(pv), mask)
    return fields


# ------------------------------------------------------------- decompose

def cmd_decompose(cfg):
    out = Path(cfg["output_dir"])
    manifest = Manifest(out)
    solver = SolverConfig(**cfg.get("solver", {}))

    for r, entry, meta, ev in _iter_events(cfg):
        fields = _load_flow_fields(cfg, ev, entry)
        (ul, vl, ml), (ur, vr, mr) = fields["left"], fields["right"]
        union = ml | mr
        n_pairs = ul.shape[0]
        stacks = {name: [] for name in
                  ("phi", "psi", "O", "I", "gradphi_u", "gradphi_v",
                   "rotpsi_u", "rotpsi_v", "harm_u", "harm_v")}
        for t in range(n_pairs):
            f = FlowField(u=ul[t] + ur[t], v=vl[t] + vr[t], valid=union)
            res = decompose(f, solver)
            stacks["phi"].append(res.phi)
            stacks["psi"].append(res.psi)
            stacks["O"].append(res.O)
            stacks["I"].append(res.I)
            stacks["gradphi_u"].append(res.grad_phi.u)
            stacks["gradphi_v"].append(res.grad_phi.v)
            stacks["rotpsi_u"].append(res.rot_psi.u)
            stacks["rotpsi_v"].append(res.rot_psi.v)
            stacks["harm_u"].append(res.harmonic.u)
            stacks["harm_v"].append(res.harmonic.v)
        for name, arrs in stacks.items():
            p = out / "decomp" / f"{ev['event_id']}_{name}.npy"
            save_array(p, np.array(arrs))
            manifest.add(p)

        # quicklooks on the temporal means
        o_mean = np.mean(stacks["O"], axis=0)
        i_mean = np.mean(stacks["I"], axis=0)
        dfree = FlowField(
            u=np.mean(np.array(stacks["rotpsi_u"]) + np.array(stacks["harm_u"]), axis=0),
            v=np.mean(np.array(stacks["rotpsi_v"]) + np.array(stacks["harm_v"]), axis=0),
            valid=union,
        )
        for name, render in (
            ("O_mean", lambda p: heatmap_png(o_mean, p, title="sources (mean)")),
            ("I_mean", lambda p: heatmap_png(i_mean, p, title="sinks (mean)")),
            ("flow_mean", lambda p: quiver_png(dfree, p, title="flow component (mean)")),
        ):
            p = out / "decomp" / f"{ev['event_id']}_{name}.png"
            render(p)
            manifest.add(p)
    manifest.write()
    return EXIT_OK


# -------------------------------------------------------------- features

_SCALAR_FIELDS = (
    "vertical_fraction", "bottom_up_share", "medial_to_lateral_left",
    "medial_to_lateral_right", "up_total", "down_total", "left_total",
    "right_total", "peak_amplitude", "duration_s",
)


def cmd_features(cfg):
    out = Path(cfg["output_dir"])
    manifest = Manifest(out)
    fcfg_raw = dict(cfg.get("features", {}))
    if "map_size" in fcfg_raw:
        fcfg_raw["map_size"] = tuple(fcfg_raw["map_size"])
    fcfg = FeatureConfig(**fcfg_raw)

    rows = []
    for r, entry, meta, ev in _iter_events(cfg):
        fields = _load_flow_fields(cfg, ev, entry)
        decomp_dir = out / "decomp"
        needed = decomp_dir / f"{ev['event_id']}_O.npy"
        if not needed.exists():
            raise MissingUpstream(f"{needed} missing; run decompose first")

        O = np.load(decomp_dir / f"{ev['event_id']}_O.npy")
        I = np.load(decomp_dir / f"{ev['event_id']}_I.npy")
        rp_u = np.load(decomp_dir / f"{ev['event_id']}_rotpsi_u.npy")
        rp_v = np.load(decomp_dir / f"{ev['event_id']}_rotpsi_v.npy")
        hm_u = np.load(decomp_dir / f"{ev['event_id']}_harm_u.npy")
        hm_v = np.load(decomp_dir / f"{ev['event_id']}_harm_v.npy")
        dfree_u, dfree_v = rp_u + hm_u, rp_v + hm_v

        (_, _, ml), (_, _, mr) = fields["left"], fields["right"]
        fs = meta["fs"]
        seqs = []
        for mask in (ml, mr):
            seqs.append(FlowSequence(fields=[
                FlowField(u=np.where(mask, dfree_u[t], 0.0),
                          v=np.where(mask, dfree_v[t], 0.0), valid=mask)
                for t in range(dfree_u.shape[0])
            ], fs=fs))

        dffw = np.load(out / ev["dffw"])
        event = _event_from_record(ev, dffw, fs)

        class _Decomp:
            pass

        decomps = []
        for t in range(O.shape[0]):
            d = _Decomp()
            d.O, d.I = O[t], I[t]
            decomps.append(d)

        fv = build_feature_vector(event, tuple(seqs), decomps, fcfg,
                                  condition=meta["condition"])

        row = {"event_id": ev["event_id"], "condition": fv.condition}
        for name in _SCALAR_FIELDS:
            row[name] = getattr(fv, name)
        for name in ("source_mean", "sink_mean", "dff_mean_map",
                     "trace", "flow_up_trace", "flow_down_trace"):
            p = out / "features" / f"{ev['event_id']}_{name}.npy"
            save_array(p, getattr(fv, name))
            manifest.add(p)
            row[name] = f"features/{ev['event_id']}_{name}.npy"
        rows.append(row)

    csv_path = out / "features" / "features.csv"
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    cols = ["event_id", "condition", *_SCALAR_FIELDS,
            "source_mean", "sink_mean", "dff_mean_map",
            "trace", "flow_up_trace", "flow_down_trace"]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row[k] is None else row[k]) for k in cols})
    manifest.add(csv_path)

    json_path = out / "features" / "features.json"
    save_json(json_path, rows)
    manifest.add(json_path)
    manifest.write()
    return EXIT_OK


def _event_from_record(ev, dffw, fs):
    from .signal import Event
    return Event(
        onset_frame=ev["onset_frame"],
        offset_frame=ev["offset_frame"],
        dffw=dffw,
        baseline=np.zeros(dffw.shape[1:]),
        mean_trace=np.asarray(ev["mean_trace"], dtype=np.float64),
        duration_s=ev["duration_s"],
        peak_amplitude=ev["peak_amplitude"],
    )


# ----------------------------------------------------------------- embed

def _load_features(cfg):
    out = Path(cfg["output_dir"])
    json_path = out / "features" / "features.json"
    if not json_path.exists():
        raise MissingUpstream(f"{json_path} missing; run features first")
    rows = json.loads(json_path.read_text())
    if not rows:
        raise MissingUpstream("features.json lists no events")
    return rows


def _variant_streams(cfg, rows, variant):
    """Assemble (streams, dataset) for the chosen VAE variant.

    Duration and amplitude are square-root scaled; every stream is
    standardized over the dataset (the scaling is stored alongside the
    model so encode stays reproducible).
    """
    out = Path(cfg["output_dir"])

    def col(name):
        return np.array([np.load(out / row[name]).ravel() for row in rows])

    trace = col("trace")
    data = {"trace": trace}
    if variant == 1:
        pass
    elif variant == 2:
        data["source_mean"] = col("source_mean")
        data["sink_mean"] = col("sink_mean")
        scalars = np.array([
            [np.sqrt(row["duration_s"]), np.sqrt(max(row["peak_amplitude"], 0.0)),
             row["up_total"], row["down_total"], row["left_total"], row["right_total"]]
            for row in rows
        ])
        data["scalars"] = scalars
    elif variant == 3:
        data["flow_up"] = col("flow_up_trace")
        data["flow_down"] = col("flow_down_trace")
    else:
        raise ConfigError(f"unknown VAE variant {variant}")

    weights = cfg.get("vae", {}).get("weights", {})
    streams = [vae_mod.StreamSpec(name, arr.shape[1], weights.get(name))
               for name, arr in data.items()]

    norm = {}
    for name, arr in data.items():
        mu = arr.mean(axis=0)
        sd = arr.std(axis=0)
        sd[sd == 0] = 1.0
        data[name] = (arr - mu) / sd
        norm[name] = {"mean": mu.tolist(), "std": sd.tolist()}
    return streams, data, norm


def cmd_embed(cfg, variant):
    out = Path(cfg["output_dir"])
    manifest = Manifest(out)
    rows = _load_features(cfg)
    vcfg = cfg.get("vae", {})

    streams, data, norm = _variant_streams(cfg, rows, variant)
    spec = vae_mod.VaeSpec(
        streams=streams,
        hidden_sizes=tuple(vcfg.get("hidden_sizes", (256, 128, 64, 32, 16, 8))),
        latent_dim=2,
        seed=int(cfg["seed"]) + variant,
    )
    opt = vae_mod.OptConfig(
        lr=vcfg.get("lr", 1e-3),
        batch_size=vcfg.get("batch_size", 32),
        epochs=vcfg.get("epochs", 500),
    )
    params, history = vae_mod.vae_train(spec, data, opt)
    z = vae_mod.encode(spec, params, data)

    vdir = out / "embed" / f"v{variant}"
    params_path = vdir / "params.npz"
    params_path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(params_path, **params)
    manifest.add(params_path)

    model_json = vdir / "model.json"
    save_json(model_json, {
        "variant": variant,
        "streams": [{"name": s.name, "length": s.length, "weight": s.loss_weight()}
                    for s in streams],
        "hidden_sizes": list(spec.hidden_sizes),
        "latent_dim": spec.latent_dim,
        "seed": spec.seed,
        "normalization": norm,
        "loss_history": history,
    })
    manifest.add(model_json)

    emb_path = vdir / "embeddings.csv"
    with open(emb_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["event_id", "z1", "z2", "condition"])
        for row, zz in zip(rows, z):
            writer.writerow([row["event_id"], repr(float(zz[0])), repr(float(zz[1])),
                             row["condition"]])
    manifest.add(emb_path)

    grid_n = vcfg.get("grid_n", 8)
    grid, outputs = vae_mod.reconstruction_manifold(spec, params, grid_n=grid_n)
    for name, arr in outputs.items():
        p = vdir / f"manifold_{name}.npy"
        save_array(p, arr)
        manifest.add(p)
        png = vdir / f"manifold_{name}.png"
        manifold_png(arr, grid_n, png, title=f"variant {variant}: {name}")
        manifest.add(png)
    grid_path = vdir / "manifold_grid.npy"
    save_array(grid_path, grid)
    manifest.add(grid_path)
    manifest.write()
    return EXIT_OK


# ------------------------------------------------------------ prototypes

def _load_embeddings(cfg, variant):
    out = Path(cfg["output_dir"])
    emb_path = out / "embed" / f"v{variant}" / "embeddings.csv"
    if not emb_path.exists():
        raise MissingUpstream(f"{emb_path} missing; run embed first")
    ids, zs, conds = [], [], []
    with open(emb_path) as fh:
        for row in csv.DictReader(fh):
            ids.append(row["event_id"])
            zs.append([float(row["z1"]), float(row["z2"])])
            conds.append(row["condition"])
    return ids, np.array(zs), conds


def cmd_prototypes(cfg, variant):
    out = Path(cfg["output_dir"])
    manifest = Manifest(out)
    ids, z, conds = _load_embeddings(cfg, variant)

    by_cond_emb, by_cond_ids = {}, {}
    for i, cond in enumerate(conds):
        by_cond_emb.setdefault(cond, []).append(z[i])
        by_cond_ids.setdefault(cond, []).append(ids[i])
    by_cond_emb = {c: np.array(v) for c, v in by_cond_emb.items()}

    gcfg_raw = cfg.get("gmm", {})
    gcfg = gmm_mod.GmmConfig(
        k=gcfg_raw.get("k", 3),
        reg_eps=gcfg_raw.get("reg_eps", 1e-6),
        seed=int(cfg["seed"]),
    )
    model = gmm_mod.gmm_fit(by_cond_emb, gcfg)
    protos = gmm_mod.prototypes(model, by_cond_emb, by_cond_ids)

    pdir = out / "prototypes" / f"v{variant}"
    report = {}
    for cond in sorted(model.mixtures):
        mix = model.mixtures[cond]
        report[cond] = {
            "prototype_event_ids": protos.indices[cond],
            "weights": mix.weights.tolist(),
            "means": mix.means.tolist(),
            "k_reduced": mix.k_reduced,
        }
        if mix.k_reduced:
            print(f"prototypes: condition {cond!r} had fewer samples than k; "
                  f"reduced to k={len(mix.weights)}", file=sys.stderr)
    proto_json = pdir / "prototypes.json"
    save_json(proto_json, report)
    manifest.add(proto_json)

    # panel: prototype trace with its model reconstruction overlaid
    rows = {row["event_id"]: row for row in _load_features(cfg)}
    spec, params, norm = _load_model(cfg, variant)
    for cond in sorted(report):
        for j, event_id in enumerate(report[cond]["prototype_event_ids"]):
            trace = np.load(out / rows[event_id]["trace"])
            batch = _normalized_single(cfg, rows[event_id], spec, norm)
            recon = vae_mod.decode(spec, params, vae_mod.encode(spec, params, batch))
            tr_norm = norm["trace"]
            recon_trace = (np.asarray(recon["trace"][0]) * np.asarray(tr_norm["std"])
                           + np.asarray(tr_norm["mean"]))
            png = pdir / f"{_safe(cond)}_k{j}_{event_id}.png"
            trace_panel_png([trace, recon_trace], png,
                            labels=["event", "reconstruction"],
                            title=f"{cond} prototype {j}: {event_id}")
            manifest.add(png)
    manifest.write()
    return EXIT_OK


def _safe(s):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in str(s)) or "cond"


def _load_model(cfg, variant):
    out = Path(cfg["output_dir"])
    vdir = out / "embed" / f"v{variant}"
    meta = json.loads((vdir / "model.json").read_text())
    streams = [vae_mod.StreamSpec(s["name"], s["length"], s["weight"])
               for s in meta["streams"]]
    spec = vae_mod.VaeSpec(streams=streams, hidden_sizes=tuple(meta["hidden_sizes"]),
                           latent_dim=meta["latent_dim"], seed=meta["seed"])
    params = dict(np.load(vdir / "params.npz"))
    return spec, params, meta["normalization"]


def _normalized_single(cfg, row, spec, norm):
    out = Path(cfg["output_dir"])
    batch = {}
    for s in spec.streams:
        if s.name == "scalars":
            raw = np.array([
                np.sqrt(row["duration_s"]), np.sqrt(max(row["peak_amplitude"], 0.0)),
                row["up_total"], row["down_total"], row["left_total"], row["right_total"]])
        else:
            key = {"flow_up": "flow_up_trace", "flow_down": "flow_down_trace"}.get(s.name, s.name)
            raw = np.load(out / row[key]).ravel()
        mu = np.asarray(norm[s.name]["mean"])
        sd = np.asarray(norm[s.name]["std"])
        batch[s.name] = ((raw - mu) / sd)[None, :]
    return batch


# ---------------------------------------------------------------- report

def cmd_report(cfg):
    out = Path(cfg["output_dir"])
    manifest = Manifest(out)
    rows = _load_features(cfg)

    by_cond = {}
    for row in rows:
        by_cond.setdefault(row["condition"], []).append(row)

    stats = {}
    rdir = out / "report"
    for cond in sorted(by_cond):
        group = by_cond[cond]
        amps = np.array([r["peak_amplitude"] for r in group])
        stats[cond] = {
            "event_count": len(group),
            "amplitude_mean": float(amps.mean()),
            "amplitude_std": float(amps.std()),
            "duration_mean": float(np.mean([r["duration_s"] for r in group])),
            "flow_totals": {
                d: float(np.sum([r[f"{d}_total"] for r in group]))
                for d in ("up", "down", "left", "right")
            },
        }
        src = np.mean([np.load(out / r["source_mean"]) for r in group], axis=0)
        png = rdir / f"{_safe(cond)}_source_mean.png"
        rdir.mkdir(parents=True, exist_ok=True)
        heatmap_png(src, png, title=f"{cond}: mean sources")
        manifest.add(png)

    report = {"conditions": stats, "total_events": len(rows)}
    for variant in (1, 2, 3):
        emb_path = out / "embed" / f"v{variant}" / "embeddings.csv"
        if emb_path.exists():
            ids, z, conds = _load_embeddings(cfg, variant)
            png = rdir / f"latent_scatter_v{variant}.png"
            scatter_png(z, conds, png, title=f"latent space, variant {variant}")
            manifest.add(png)
            report[f"embeddings_v{variant}"] = str(emb_path.relative_to(out))

    if len(rows) == 0:
        report["note"] = "no events survived exclusion"
    report_json = rdir / "report.json"
    save_json(report_json, report)
    manifest.add(report_json)
    manifest.write()
    return EXIT_OK


# ----------------------------------------------------------------- synth

def cmd_synth(out_dir, seed=0, conditions=("iso1.8", "iso2.0", "iso2.2")):
    """Generate a demo dataset plus a ready-to-run config.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    recordings = []
    for i, cond in enumerate(conditions):
        schedule = []
        t = 2.0
        n_events = int(rng.integers(3, 6))
        for _ in range(n_events):
            dur = float(rng.uniform(0.5, 1.5))
            schedule.append(synth_mod.EventSpec(
                onset_s=t,
                duration_s=dur,
                amplitude=float(rng.uniform(0.08, 0.25)),
                source_center=(int(rng.integers(8, 24)), int(rng.integers(8, 56))),
                trend_direction=(1.0, 0.0),
            ))
            t += dur + float(rng.uniform(1.0, 3.0))
        rec, truth = synth_mod.make_recording(
            shape=(32, 64), fs=100.0, duration_s=30.0, schedule=schedule,
            noise_sigma=0.002, heartbeat_amplitude=0.01,
            condition=cond, seed=seed + i,
        )
        stem = f"rec{i:03d}"
        np.save(out / f"{stem}.npy", rec.frames.astype(np.float32))
        np.save(out / f"{stem}_mask_left.npy", rec.mask_left)
        np.save(out / f"{stem}_mask_right.npy", rec.mask_right)
        save_json(out / f"{stem}_truth.json", truth)
        recordings.append({
            "stack": f"{stem}.npy",
            "fs": 100.0,
            "mask_left": f"{stem}_mask_left.npy",
            "mask_right": f"{stem}_mask_right.npy",
            "condition": cond,
        })

    config = {
        "recordings": recordings,
        "output_dir": "out",
        "seed": seed,
        "vae": {"epochs": 100},
    }
    save_json(out / "config.json", config)
    print(f"synth dataset written to {out}")
    return EXIT_OK


# ------------------------------------------------------------------ main

def build_parser():
    parser = argparse.ArgumentParser(
        prog="slowwave",
        description="Slow-wave detection and characterization pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        if name != "synth":
            p.add_argument("--config", required=True, help="pipeline config JSON")
            p.add_argument("--seed", type=int, default=None, help="override global seed")
            p.add_argument("--output", default=None, help="override output directory")
        return p

    add("detect", help="segment slow-wave events")
    add("flow", help="compute optical flow per event")
    add("decompose", help="Helmholtz-decompose the flow fields")
    add("features", help="build per-event feature vectors")
    p_embed = add("embed", help="train a VAE and embed events")
    p_embed.add_argument("--variant", type=int, choices=(1, 2, 3), required=True)
    p_proto = add("prototypes", help="fit per-condition GMMs and pick prototypes")
    p_proto.add_argument("--variant", type=int, choices=(1, 2, 3), default=1)
    add("report", help="aggregate per-condition statistics and panels")

    p_synth = sub.add_parser("synth", help="generate a synthetic demo dataset")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--conditions", nargs="+",
                         default=["iso1.8", "iso2.0", "iso2.2"])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args.out, seed=args.seed, conditions=tuple(args.conditions))
        cfg = load_config(args.config, overrides={
            "seed": args.seed, "output_dir": args.output,
        })
        if args.command == "detect":
            return cmd_detect(cfg)
        if args.command == "flow":
            return cmd_flow(cfg)
        if args.command == "decompose":
            return cmd_decompose(cfg)
        if args.command == "features":
            return cmd_features(cfg)
        if args.command == "embed":
            return cmd_embed(cfg, args.variant)
        if args.command == "prototypes":
            return cmd_prototypes(cfg, args.variant)
        if args.command == "report":
            return cmd_report(cfg)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MissingUpstream as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
