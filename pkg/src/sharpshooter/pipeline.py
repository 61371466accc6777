"""Verb-level pipeline steps writing into an output directory with a manifest.

Layout under the output directory::

    data/dataset.json          standardized dataset + standardizer
    models/{classifier,tvae,uvae}.json
    reports/training.json      loss histories, test AUC, projection score
    results/<method>.jsonl     one counterfactual record per line
    reports/metrics.json       quality metrics per method
    reports/table.txt          method x metric table
    viz/*.csv                  plot-ready exports
    sweep/sweep.csv            hyperparameter sweep
    timing/<method>.csv        seconds per counterfactual
    timing/summary.json        mean seconds per counterfactual per method
    timing/table.txt           the metric table with its time column
    manifest.json

Wall-clock measurements live only under ``timing/`` (and in the manifest's
hashes and timestamps); every other file is a pure function of the config.
"""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import os
import tempfile
import zlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import gdi_cf, gdl_cf
from .classifier import (auc, build_classifier, classifier_from_dict, classifier_to_dict, classify,
                         train_classifier)
from .config import ExperimentConfig
from .data import (Dataset, Standardizer, SyntheticSpec, generate_synthetic_dataset,
                   read_csv_dataset, standardize_dataset)
from .errors import PrerequisiteError
from .metrics import evaluate_batch, render_table, reports_to_dict
from .results import METHODS, read_jsonl, write_jsonl
from .shooter import alpha_gd_cf, line_search_cf, project_to_target
from .vae import build_vae, encode, train_vae, vae_from_dict, vae_to_dict
from .viz import (SweepSettings, build_hexbin, latent_lines, pca_fit, sample_boundary_cloud,
                  sweep_and_pareto, trace_interpolation)

VERBS = ("gen-data", "train", "explain", "evaluate", "visualize", "sweep", "all")

DATASET = "data/dataset.json"
MODELS = {"classifier": "models/classifier.json", "tvae": "models/tvae.json",
          "uvae": "models/uvae.json"}
TRAINING = "reports/training.json"
METRICS = "reports/metrics.json"
TABLE = "reports/table.txt"
TIMING = "timing/summary.json"
TIMED_TABLE = "timing/table.txt"
MANIFEST = "manifest.json"


def derive_seed(base: int, name: str) -> int:
    return int(np.random.SeedSequence([base, zlib.crc32(name.encode())]).generate_state(1)[0])


def result_path(method: str) -> str:
    return f"results/{method}.jsonl"


def timing_path(method: str) -> str:
    return f"timing/{method}.csv"


# ---------------------------------------------------------------------------
# file helpers

def atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """An output directory plus the manifest that records what is in it."""

    def __init__(self, cfg: ExperimentConfig, out_dir=None, jobs: int = 1):
        self.cfg = cfg
        self.out = Path(out_dir if out_dir is not None else cfg.output)
        self.jobs = max(1, int(jobs))
        self._manifest = self._load_manifest()

    # -- manifest ----------------------------------------------------------
    def _load_manifest(self) -> dict:
        p = self.out / MANIFEST
        if p.exists():
            return json.loads(p.read_text())
        now = _now()
        return {"artifacts": {}, "created": now, "updated": now}

    def write(self, rel: str, text: str, verb: str):
        atomic_write(self.out / rel, text)
        self._manifest["artifacts"][rel] = {"sha256": hashlib.sha256(text.encode()).hexdigest(),
                                            "verb": verb}

    def commit(self):
        m = self._manifest
        m["config_hash"] = self.cfg.digest()
        m["tool_version"] = __version__
        m["updated"] = _now()
        atomic_write(self.out / MANIFEST, dumps(m))

    @property
    def manifest(self) -> dict:
        return self._manifest

    def verify_manifest(self) -> list:
        """Relative paths whose file is missing or whose hash disagrees."""
        bad = []
        for rel, entry in self._manifest["artifacts"].items():
            p = self.out / rel
            if not p.exists() or sha256_file(p) != entry["sha256"]:
                bad.append(rel)
        return bad

    # -- loading -----------------------------------------------------------
    def _need(self, rel: str, verb: str) -> Path:
        p = self.out / rel
        if not p.exists():
            raise PrerequisiteError(f"{p} is missing; run `{verb}` first")
        return p

    def load_dataset(self):
        d = json.loads(self._need(DATASET, "gen-data").read_text())
        st = Standardizer.from_dict(d["standardizer"]) if d.get("standardizer") else None
        return Dataset.from_dict(d["dataset"]), st

    def load_models(self):
        loaded = {k: json.loads(self._need(rel, "train").read_text()) for k, rel in MODELS.items()}
        return (classifier_from_dict(loaded["classifier"]), vae_from_dict(loaded["tvae"]),
                vae_from_dict(loaded["uvae"]))

    def load_results(self, method: str):
        with open(self._need(result_path(method), "explain")) as fh:
            results = read_jsonl(fh)
        times = self.out / timing_path(method)
        if times.exists():
            with open(times, newline="") as fh:
                rows = list(csv.DictReader(fh))
            if len(rows) == len(results):
                for r, row in zip(results, rows):
                    r.wall_time = float(row["wall_time"])
        return results

    # -- helpers -----------------------------------------------------------
    def base_samples(self, ds: Dataset, clf, n: int):
        """Held-out base-class rows that the classifier also places below p."""
        rows, labels = ds.test
        rows = rows[labels == 0]
        if len(rows) == 0:
            return rows
        keep = classify(clf, rows) <= self.cfg.sharpshooter.p
        return rows[keep][:n]


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# verbs

def gen_data(run: Run):
    cfg = run.cfg
    seed = derive_seed(cfg.seed, "data")
    if cfg.dataset.csv is not None:
        ds = read_csv_dataset(cfg.dataset.csv, seed, cfg.dataset.test_fraction)
    else:
        spec = SyntheticSpec.from_dict({**cfg.dataset.synthetic,
                                        "test_fraction": cfg.dataset.test_fraction})
        ds = generate_synthetic_dataset(spec, seed)
    st = None
    if cfg.dataset.standardize:
        st, ds = standardize_dataset(ds)
    payload = {"dataset": ds.to_dict(), "standardizer": st.to_dict() if st else None}
    run.write(DATASET, dumps(payload), "gen-data")
    return ds


def train(run: Run):
    cfg = run.cfg
    ds, _ = run.load_dataset()
    x_train, y_train = ds.train
    x_test, y_test = ds.test
    c = cfg.classifier
    clf = build_classifier(ds.schema, c.hidden, c.activation, derive_seed(cfg.seed, "clf-init"))
    clf, clf_hist = train_classifier(clf, x_train, y_train, c.epochs, c.batch_size,
                                     derive_seed(cfg.seed, "clf-train"), c.lr)

    def fit(name, vc, rows, role):
        model = build_vae(ds.schema, vc.latent_dim, vc.hidden, beta=vc.beta, w_cat=vc.w_cat,
                          role=role, activation=vc.activation,
                          seed=derive_seed(cfg.seed, f"{name}-init"))
        return train_vae(model, rows, vc.epochs, vc.batch_size,
                         derive_seed(cfg.seed, f"{name}-train"), vc.lr)

    tvae, tvae_hist = fit("tvae", cfg.tvae, x_train[y_train == 1], "target")
    uvae, uvae_hist = fit("uvae", cfg.uvae, x_train, "unified")

    base_test = x_test[y_test == 0]
    proj_prob = float(np.mean(classify(clf, ds.schema.harden(project_to_target(tvae, base_test)))))
    report = {
        "classifier": {"loss": clf_hist, "test_auc": auc(classify(clf, x_test), y_test)},
        "tvae": {"history": [h.to_dict() for h in tvae_hist],
                 "avg_projected_base_prob": proj_prob},
        "uvae": {"history": [h.to_dict() for h in uvae_hist]},
    }
    run.write(MODELS["classifier"], dumps(classifier_to_dict(clf)), "train")
    run.write(MODELS["tvae"], dumps(vae_to_dict(tvae)), "train")
    run.write(MODELS["uvae"], dumps(vae_to_dict(uvae)), "train")
    run.write(TRAINING, dumps(report), "train")
    return report


def _explain_one(args):
    method, clf, tvae, uvae, row, cfg = args
    if method == "ss-line":
        return line_search_cf(clf, tvae, uvae, row, cfg.sharpshooter)
    if method == "ss-gd":
        return alpha_gd_cf(clf, tvae, uvae, row, cfg.sharpshooter)
    if method == "gdi":
        return gdi_cf(clf, row, cfg.gdi)
    return gdl_cf(clf, uvae, row, cfg.gdl)


def explain(run: Run, methods=None):
    cfg = run.cfg
    methods = list(methods or cfg.explain.methods)
    ds, _ = run.load_dataset()
    clf, tvae, uvae = run.load_models()
    base = run.base_samples(ds, clf, cfg.explain.n_samples)
    out = {}
    for method in methods:
        tasks = [(method, clf, tvae, uvae, row, cfg) for row in base]
        if run.jobs > 1:
            with ProcessPoolExecutor(max_workers=run.jobs) as ex:
                results = list(ex.map(_explain_one, tasks, chunksize=8))
        else:
            results = [_explain_one(t) for t in tasks]
        buf = io.StringIO()
        write_jsonl(results, buf, include_time=False)
        run.write(result_path(method), buf.getvalue(), "explain")
        run.write(timing_path(method),
                  csv_text(["index", "wall_time"], [(i, r.wall_time) for i, r in enumerate(results)]),
                  "explain")
        out[method] = results
    return out


def evaluate(run: Run, methods=None):
    cfg = run.cfg
    methods = list(methods or cfg.explain.methods)
    clf, _, uvae = run.load_models()
    p = cfg.sharpshooter.p
    reports = [evaluate_batch(clf, uvae, run.load_results(m), p) for m in methods]
    run.write(METRICS, dumps(reports_to_dict(reports, include_time=False)), "evaluate")
    run.write(TABLE, render_table(reports, include_time=False), "evaluate")
    run.write(TIMING, dumps({r.method: r.time for r in reports}), "evaluate")
    run.write(TIMED_TABLE, render_table(reports), "evaluate")
    return reports


def visualize(run: Run):
    cfg = run.cfg
    v = cfg.viz
    ds, _ = run.load_dataset()
    clf, tvae, uvae = run.load_models()
    rows, labels = ds.test
    base = run.base_samples(ds, clf, v.n_lines)
    pairs = latent_lines(tvae, uvae, base)

    z_base = encode(uvae, rows[labels == 0])[0]
    z_target = encode(uvae, rows[labels == 1])[0]
    z_proj = np.vstack([b for _, b in pairs]) if pairs else np.zeros((0, uvae.latent_dim))
    cf_codes = []
    if (run.out / result_path("ss-line")).exists():
        cf_rows = [r.x_cf for r in run.load_results("ss-line") if r.x_cf is not None]
        if cf_rows:
            cf_codes = [encode(uvae, np.vstack(cf_rows))[0]]
    groups = [("base", z_base), ("target", z_target), ("projected", z_proj)]
    if cf_codes:
        groups.append(("counterfactual", cf_codes[0]))
    projector = pca_fit(np.vstack([z for _, z in groups[:3]]))

    scatter = []
    for name, z in groups:
        for x, y in projector.project(z) if len(z) else []:
            scatter.append((x, y, name))
    run.write("viz/codes.csv", csv_text(["x", "y", "class"], scatter), "visualize")

    segs = [(*projector.project(a)[0], *projector.project(b)[0]) for a, b in pairs]
    run.write("viz/lines.csv", csv_text(["x0", "y0", "x1", "y1"], segs), "visualize")

    _, pts, scores = sample_boundary_cloud(clf, uvae, pairs, v.alpha_count, projector)
    grid = build_hexbin(pts, scores, v.cell_size)
    run.write("viz/hexbin.csv",
              csv_text(["q", "r", "center_x", "center_y", "count", "mean_score"], grid.rows()),
              "visualize")

    trace_rows = []
    if len(base):
        alphas = np.arange(1, v.trace_points + 1) / v.trace_points
        for a, sample, score in trace_interpolation(clf, tvae, uvae, base[0], alphas):
            trace_rows.append((a, score, *sample.tolist()))
    run.write("viz/trace.csv", csv_text(["alpha", "score", *ds.schema.names], trace_rows),
              "visualize")
    return grid


def sweep(run: Run):
    cfg = run.cfg
    s = cfg.sweep
    ds, _ = run.load_dataset()
    clf, _, _ = run.load_models()
    x_train, y_train = ds.train
    x_test, y_test = ds.test
    vc = cfg.tvae if s.role == "target" else cfg.uvae
    if s.role == "target":
        train_rows, eval_rows = x_train[y_train == 1], x_test[y_test == 1]
    else:
        train_rows, eval_rows = x_train, x_test
    settings = SweepSettings(hidden=tuple(vc.hidden), epochs=s.epochs, batch_size=vc.batch_size,
                             lr=vc.lr, latent_dim=vc.latent_dim, w_cat=vc.w_cat, role=s.role,
                             seed=derive_seed(cfg.seed, "sweep"))
    records, front = sweep_and_pareto(clf, ds.schema, train_rows, eval_rows, x_test[y_test == 0],
                                       s.betas, s.values, s.axis, settings, run.jobs)
    rows = [(r.beta, r.value, r.mse, r.kld, r.avg_proj_prob, int(r.on_front), int(r.diverged))
            for r in records]
    header = ["beta", s.axis, "mse", "kld", "avg_proj_prob", "on_front", "diverged"]
    run.write("sweep/sweep.csv", csv_text(header, rows), "sweep")
    return records, front


def run_command(verb: str, cfg: ExperimentConfig, out_dir=None, methods=None, jobs=1) -> dict:
    """Execute one verb and return the updated manifest."""
    if verb not in VERBS:
        raise ValueError(f"unknown verb {verb!r}; expected one of {VERBS}")
    run = Run(cfg, out_dir, jobs)
    try:
        if verb in ("gen-data", "all"):
            gen_data(run)
        if verb in ("train", "all"):
            train(run)
        if verb in ("explain", "all"):
            explain(run, methods)
        if verb in ("evaluate", "all"):
            evaluate(run, methods)
        if verb in ("visualize", "all"):
            visualize(run)
        if verb == "sweep":
            sweep(run)
    finally:
        if run.manifest["artifacts"]:
            run.commit()
    return run.manifest


__all__ = ["VERBS", "METHODS", "Run", "run_command", "derive_seed"]
