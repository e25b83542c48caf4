"""Stage orchestration. Stages exchange data only through files in the output directory."""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
from dataclasses import dataclass, fields, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from . import abuse, characterize, coordination, evaluation, features, forest, gcn
from . import node2vec as n2v
from .community import Partition, detect_communities
from .graph import CorpusError, load_corpus, parse_time

log = logging.getLogger(__name__)

STAGES = ("ingest", "communities", "characterize", "coordination", "abuse", "features", "embed",
          "train", "evaluate", "summary")
SPLIT_MODES = ("random", "stratified")


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _csv_list(value) -> tuple[str, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return tuple(v.strip() for v in str(value).split(",") if v.strip())


@dataclass(frozen=True)
class PipelineConfig:
    accounts: str = ""
    edges: str = ""
    tweets: str = ""
    labels: str = ""
    output: str = "out"
    pivot: str = "2021-11-12T00:00:00Z"
    stages: tuple[str, ...] = STAGES
    min_size: int = 100
    community_seed: int = 42
    exclude_communities: tuple[str, ...] = ()
    fb_only: bool = False
    coordination_floor: float = 0.0
    coordination_step: float = 0.05
    engagement_kinds: tuple[str, ...] = coordination.ENGAGEMENT_KINDS
    coordination_denominator: str = "community"
    min_handles: int = abuse.MIN_HANDLES
    families: tuple[str, ...] = ("profile", "tweets", "ego")
    embed_dim: int = 256
    node2vec_dim: int = 256
    node2vec_walk_length: int = 40
    node2vec_walks: int = 5
    node2vec_window: int = 5
    node2vec_p: float = 1.0
    node2vec_q: float = 0.5
    node2vec_epochs: int = 5
    node2vec_seed: int = 42
    model: str = "forest"
    trees: int = 100
    hidden: int = 64
    epochs: int = 2500
    lr: float = 0.01
    model_seed: int = 42
    split: str = "both"
    split_seed: int = 42
    test_positives: int = 500
    test_negatives: int = 500
    per_community: int = 25
    threshold: float = 0.5

    # INI section -> keys it may hold
    SECTIONS = {
        "corpus": ("accounts", "edges", "tweets", "labels"),
        "run": ("output", "pivot", "stages"),
        "communities": ("min_size", "community_seed"),
        "characterize": ("exclude_communities", "fb_only"),
        "coordination": ("coordination_floor", "coordination_step", "engagement_kinds",
                         "coordination_denominator"),
        "abuse": ("min_handles",),
        "features": ("families", "embed_dim"),
        "embed": ("node2vec_dim", "node2vec_walk_length", "node2vec_walks", "node2vec_window",
                  "node2vec_p", "node2vec_q", "node2vec_epochs", "node2vec_seed"),
        "train": ("model", "trees", "hidden", "epochs", "lr", "model_seed", "threshold"),
        "split": ("split", "split_seed", "test_positives", "test_negatives", "per_community"),
    }

    def validate(self) -> PipelineConfig:
        unknown = [s for s in self.stages if s not in STAGES]
        if unknown:
            raise ConfigError(f"unknown stages: {unknown}")
        bad = [f for f in self.families if f not in features.FAMILIES or f == "combined"]
        if bad:
            raise ConfigError(f"unknown feature families: {bad}")
        if self.model not in ("forest", "gcn"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.split not in (*SPLIT_MODES, "both"):
            raise ConfigError(f"unknown split mode {self.split!r}")
        if self.coordination_denominator not in ("community", "network"):
            raise ConfigError("coordination denominator must be 'community' or 'network'")
        if not 0 < self.coordination_step <= 1:
            raise ConfigError("coordination step must lie in (0, 1]")
        if self.min_size < 1:
            raise ConfigError("min_size must be positive")
        if self.embed_dim and self.embed_dim < 8:
            raise ConfigError("embed_dim must be 0 or at least 8")
        try:
            parse_time(self.pivot)
        except ValueError as exc:
            raise ConfigError(f"bad pivot {self.pivot!r}: {exc}") from None
        return self

    @property
    def split_modes(self) -> tuple[str, ...]:
        return SPLIT_MODES if self.split == "both" else (self.split,)

    @property
    def out(self) -> Path:
        return Path(self.output)


def _coerce(name: str, raw):
    target = {f.name: f for f in fields(PipelineConfig)}[name]
    default = target.default
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            v = str(raw).strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, tuple):
            return _csv_list(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return str(raw)
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Read an INI file (sections as in ``PipelineConfig.SECTIONS``) then apply overrides.

    Relative corpus paths in the file resolve against the file's directory.
    """
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"{path}: no such config file")
        parser = configparser.ConfigParser()
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            allowed = PipelineConfig.SECTIONS.get(section)
            if allowed is None:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key, raw in parser[section].items():
                if key not in allowed:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
                values[key] = _coerce(key, raw)
        for key in ("accounts", "edges", "tweets", "labels", "output"):
            if values.get(key) and not Path(values[key]).is_absolute():
                values[key] = str(path.parent / values[key])
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in {f.name for f in fields(PipelineConfig)}:
            raise ConfigError(f"unknown option {key!r}")
        values[key] = _coerce(key, raw)
    return replace(PipelineConfig(), **values).validate()


# ---- file helpers ---------------------------------------------------------------


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _read(path: Path):
    if not path.exists():
        raise DataError(f"{path}: missing input (run the producing stage first)")
    return json.loads(path.read_text(encoding="utf-8"))


def _clean(x):
    """JSON-safe floats (NaN/inf become null)."""
    if isinstance(x, float):
        return x if np.isfinite(x) else None
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        return _clean(x.item())
    return x


class Pipeline:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self._corpus = None

    # inputs shared by stages: only the corpus files and stage outputs on disk
    @property
    def corpus(self):
        if self._corpus is None:
            c = self.config
            if not c.accounts or not c.edges:
                raise ConfigError("corpus accounts and edges paths are required")
            for p in (c.accounts, c.edges, c.tweets, c.labels):
                if p and not Path(p).exists():
                    raise DataError(f"{p}: no such file")
            try:
                self._corpus = load_corpus(c.accounts, c.edges, c.tweets or None, c.labels or None)
            except CorpusError as exc:
                raise DataError(str(exc)) from None
        return self._corpus

    @property
    def pivot(self) -> datetime:
        return parse_time(self.config.pivot)

    def path(self, name: str) -> Path:
        return self.config.out / name

    def partition(self) -> Partition:
        return Partition.from_json(_read(self.path("partition.json")))

    # ---- stages ----------------------------------------------------------------
    def ingest(self):
        c = self.corpus
        _dump(self.path("ingest.json"), {
            "accounts": len(c.accounts),
            "nodes": len(c.graph),
            "external_nodes": len(c.graph.nodes) - len(c.graph.internal().nodes),
            "edges": len(c.graph.edges),
            "tweets": sum(len(t) for t in c.tweets.values()),
            "labels": len(c.labels),
            "follow_backs": sum(r.followed_back for r in c.labels.values()),
        })

    def communities(self):
        c = self.corpus
        part = detect_communities(c.graph.internal(), min_size=self.config.min_size,
                                  seed=self.config.community_seed).with_labels(c.labels)
        part.dump(self.path("partition.json"))

    def _excluded_ids(self, part: Partition) -> list[int]:
        out = []
        for token in self.config.exclude_communities:
            hits = [s.community_id for s in part.communities
                    if s.label.lower() == token.lower() or str(s.community_id) == token]
            if not hits:
                raise ConfigError(f"excluded community {token!r} not found")
            out += hits
        return out

    def characterize(self):
        c, part = self.corpus, self.partition()
        rows = characterize.compute_measures(c, self.pivot)
        report = {"comparison": characterize.binary_comparison(rows, c.labels).to_json()}
        try:
            corr = characterize.community_correlation(rows, part, self._excluded_ids(part),
                                                      self.config.fb_only, c.labels)
            report["correlation"] = {k: {"r": r, "p": p} for k, (r, p) in corr.items()}
        except ValueError as exc:
            log.warning("community correlation skipped: %s", exc)
            report["correlation"] = None
            report["correlation_error"] = str(exc)
        _dump(self.path("characterization.json"), _clean(report))

    def coordination(self):
        c, part = self.corpus, self.partition()
        cfg = self.config
        curves = coordination.coordination_curves(
            part, c.tweets, coordination.default_thresholds(cfg.coordination_step), cfg.coordination_floor,
            cfg.engagement_kinds, cfg.coordination_denominator)
        _dump(self.path("coordination.json"), {"communities": [
            {"id": cid, "label": part.stats(cid).label, "points": [list(p) for p in cv.points]}
            for cid, cv in curves.items()]})
        with open(self.path("coordination.csv"), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["community", "threshold", "ratio"])
            for cid, cv in curves.items():
                for t, r in cv.points:
                    w.writerow([cid, repr(t), repr(r)])

    def abuse(self):
        c, part = self.corpus, self.partition()
        _dump(self.path("abuse.json"), _clean(abuse.abuse_report(c, part, self.config.min_handles)))

    def features(self):
        c = self.corpus
        ids = sorted(c.accounts)
        fams = [f for f in self.config.families if f != "embedding"]
        mats = [features.build_family(c, f, ids, self.pivot, embed_dim=self.config.embed_dim) for f in fams]
        cols = tuple(f"{m.family}.{col}" for m in mats for col in m.columns)
        values = np.hstack([m.values for m in mats]) if mats else np.zeros((len(ids), 0))
        features.FeatureMatrix(tuple(ids), "combined", cols, values).to_csv(self.path("features.csv"))

    def embed(self):
        cfg = self.config
        params = n2v.Node2VecParams(dim=cfg.node2vec_dim, walk_length=cfg.node2vec_walk_length,
                                    walks_per_node=cfg.node2vec_walks, window=cfg.node2vec_window,
                                    p=cfg.node2vec_p, q=cfg.node2vec_q, epochs=cfg.node2vec_epochs,
                                    seed=cfg.node2vec_seed)
        emb = n2v.node2vec(self.corpus.graph.internal(), params)
        n2v.write_embeddings(self.path("embeddings.csv"), emb)

    def _design(self) -> features.FeatureMatrix:
        path = self.path("features.csv")
        if not path.exists():
            raise DataError(f"{path}: missing input (run the features stage first)")
        base = features.FeatureMatrix.from_csv(path)
        if "embedding" not in self.config.families:
            return base
        emb_path = self.path("embeddings.csv")
        if not emb_path.exists():
            raise DataError(f"{emb_path}: missing input (run the embed stage first)")
        emb = n2v.read_embeddings(emb_path)
        dim = len(next(iter(emb.values())))
        vals = np.array([emb.get(u, np.zeros(dim)) for u in base.user_ids])
        cols = base.columns + tuple(f"embedding.n2v_{i}" for i in range(dim))
        return features.FeatureMatrix(base.user_ids, "combined", cols, np.hstack([base.values, vals]))

    def _standardized(self, design, train_ids) -> tuple[features.FeatureMatrix, dict]:
        scaler = features.Standardizer.fit(design.values[design.rows(train_ids)])
        x = features.FeatureMatrix(design.user_ids, "combined", design.columns, scaler.transform(design.values))
        return x, {"columns": list(design.columns), "mean": scaler.mean.tolist(), "scale": scaler.scale.tolist()}

    def train(self):
        c, cfg = self.corpus, self.config
        part = self.partition()
        design = self._design()
        eligible = [u for u in design.user_ids if u in c.labels]
        splits = [evaluation.make_splits(c.labels, part, m, cfg.split_seed, cfg.test_positives,
                                         cfg.test_negatives, cfg.per_community, eligible=eligible)
                  for m in cfg.split_modes]
        evaluation.write_splits(self.path("splits.json"), splits)
        for sp in splits:
            x, scaler = self._standardized(design, sp.train)
            _dump(self.path(f"scaler_{sp.name.lower()}.json"), scaler)
            if cfg.model == "forest":
                y = np.array([c.labels[u].followed_back for u in sp.train], dtype=int)
                model = forest.train_forest(x.select(sp.train), y, trees=cfg.trees, seed=cfg.model_seed)
                model.save(self.path(f"model_{sp.name.lower()}.json"))
            else:
                graph = c.graph.internal().subgraph(design.user_ids)
                train_set = set(sp.train)
                y = np.array([int(c.labels[u].followed_back) if u in train_set else -1
                              for u in design.user_ids])
                model = gcn.train_gcn(graph, x, y, hidden=cfg.hidden, epochs=cfg.epochs, lr=cfg.lr,
                                      seed=cfg.model_seed)
                model.save(self.path(f"gcn_{sp.name.lower()}.bin"))

    def evaluate(self):
        c, cfg = self.corpus, self.config
        design = self._design()
        splits = evaluation.read_splits(self.path("splits.json"))
        reports = []
        for sp in splits:
            scaler = _read(self.path(f"scaler_{sp.name.lower()}.json"))
            if tuple(scaler["columns"]) != design.columns:
                raise DataError("feature columns changed since training")
            std = features.Standardizer(np.array(scaler["mean"]), np.array(scaler["scale"]))
            x = features.FeatureMatrix(design.user_ids, "combined", design.columns, std.transform(design.values))
            if cfg.model == "forest":
                model = forest.ForestModel.load(self.path(f"model_{sp.name.lower()}.json"))
                probs = model.predict_proba(x)
            else:
                model = gcn.GCNModel.load(self.path(f"gcn_{sp.name.lower()}.bin"))
                probs = model.predict_proba(x, c.graph.internal().subgraph(design.user_ids))
            report = evaluation.evaluate(dict(zip(design.user_ids, probs.tolist())), c.labels, sp,
                                         cfg.threshold)
            reports.append(report.to_json())
        _dump(self.path("evaluation.json"), _clean({"model": cfg.model, "families": list(cfg.families),
                                                    "reports": reports}))

    def summary(self):
        out: dict = {}
        part_path = self.path("partition.json")
        if part_path.exists():
            part = self.partition()
            out["modularity"] = part.modularity
            out["communities"] = [
                {"id": s.community_id, "label": s.label, "size": s.size,
                 "follow_back_ratio": s.follow_back_ratio, "automated_ratio": s.automated_ratio,
                 "edge_reciprocity": s.edge_reciprocity, "is_none": s.is_none}
                for s in part.communities]
        for key, name in (("characterization", "characterization.json"), ("abuse", "abuse.json"),
                          ("classification", "evaluation.json")):
            if self.path(name).exists():
                out[key] = _read(self.path(name))
        if self.path("coordination.json").exists():
            coord = _read(self.path("coordination.json"))
            out["coordination"] = {str(c["id"]): c["points"][-1][1] if c["points"] else None
                                   for c in coord["communities"]}
        _dump(self.path("summary.json"), _clean(out))

    def run(self, stages=None) -> list[str]:
        stages = tuple(stages or self.config.stages)
        if "embed" in stages and "embedding" not in self.config.families and stages == STAGES:
            stages = tuple(s for s in stages if s != "embed")
        self.config.out.mkdir(parents=True, exist_ok=True)
        done = []
        for name in STAGES:
            if name not in stages:
                continue
            log.info("stage %s", name)
            try:
                getattr(self, name)()
            except (ConfigError, DataError):
                raise
            except Exception as exc:  # noqa: BLE001 - any failure aborts with the stage name
                raise StageError(name, exc) from exc
            done.append(name)
        return done


def run_pipeline(config: PipelineConfig) -> list[str]:
    return Pipeline(config).run()


# ---- report rendering -------------------------------------------------------------


def _fmt(v, digits=3):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.{digits}g}" if abs(v) >= 1000 or (v != 0 and abs(v) < 1e-3) else f"{v:.{digits}f}"
    return str(v)


def _tables(summary: dict) -> dict[str, tuple[list[str], list[list]]]:
    tables = {}
    tables["communities"] = (
        ["id", "label", "size", "follow_back_ratio", "automated_ratio", "edge_reciprocity"],
        [[c["id"], c["label"], c["size"], c["follow_back_ratio"], c["automated_ratio"], c["edge_reciprocity"]]
         for c in summary.get("communities", [])],
    )
    char = summary.get("characterization") or {}
    corr = char.get("correlation") or {}
    rows = []
    for m in (char.get("comparison") or {}).get("measures", []):
        cr = corr.get(m["measure"]) or {}
        rows.append([m["measure"], m["statistic_kind"], m["group_stat_fb"], m["group_stat_other"], m["diff"],
                     m["test"], m["p"], cr.get("r"), cr.get("p")])
    tables["characterization"] = (
        ["measure", "statistic", "follow_back", "other", "diff", "test", "p", "corr_r", "corr_p"], rows)
    cls = summary.get("classification") or {}
    tables["classification"] = (
        ["model", "split", "precision", "recall", "f1"],
        [[cls.get("model"), r["split"], r["precision"], r["recall"], r["f1"]] for r in cls.get("reports", [])],
    )
    return tables


def render_report(summary_path, fmt: str = "markdown", table: str | None = None) -> str:
    summary_path = Path(summary_path)
    if fmt not in ("json", "csv", "markdown"):
        raise ConfigError(f"unknown report format {fmt!r}")
    if not summary_path.exists():
        raise DataError(f"{summary_path}: no such file")
    text = summary_path.read_text(encoding="utf-8")
    if fmt == "json":
        return text
    tables = _tables(json.loads(text))
    if table is not None and table not in tables:
        raise ConfigError(f"unknown table {table!r}; choose from {sorted(tables)}")
    names = [table] if table else list(tables)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for i, name in enumerate(names):
            header, rows = tables[name]
            if len(names) > 1:
                if i:
                    buf.write("\n")
                buf.write(f"# {name}\n")
            w.writerow(header)
            for r in rows:
                w.writerow(["" if v is None else v for v in r])
        return buf.getvalue()
    parts = []
    for name in names:
        header, rows = tables[name]
        parts.append(f"## {name.capitalize()}\n")
        parts.append("| " + " | ".join(header) + " |")
        parts.append("|" + "|".join("---" for _ in header) + "|")
        for r in rows:
            parts.append("| " + " | ".join(_fmt(v) for v in r) + " |")
        parts.append("")
    return "\n".join(parts)
