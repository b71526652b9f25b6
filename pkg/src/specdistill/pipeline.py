"""Teacher, baseline student and distilled student on synthetic data."""

import logging
import os

import numpy as np

from . import report
from .estimators import TinyViTClassifier
from .spectral import profile_distance
from .tinyvit.data import synth_dataset

log = logging.getLogger(__name__)

VAL_SEED_OFFSET = 1_000_003


def _model_kwargs(section, data, seed):
    kw = dict(section)
    kw.setdefault("seed", seed)
    return dict(kw, epochs=data["epochs"], lr=data["lr"], batch_size=data["batch"],
                weight_decay=data["weight_decay"], probe_size=data["probe"])


def run_distillation(cfg, out_dir):
    """Train the three models described by ``cfg`` and write every artifact to ``out_dir``.

    Returns the dynamics report (also written as ``dynamics.json``).
    """
    data, dcfg = cfg["data"], cfg["distill"]
    seed = data["seed"]
    os.makedirs(out_dir, exist_ok=True)
    X, y = synth_dataset(seed, data["count"])
    Xv, yv = synth_dataset(seed + VAL_SEED_OFFSET, data["val_count"])
    probe = Xv[: data["probe"]]

    if cfg["io"].get("teacher_checkpoint"):
        log.info("loading teacher from %s", cfg["io"]["teacher_checkpoint"])
        teacher = TinyViTClassifier.from_checkpoint(cfg["io"]["teacher_checkpoint"])
        teacher_history = []
    else:
        log.info("training teacher")
        teacher = TinyViTClassifier(**_model_kwargs(cfg["model"]["teacher"], data, seed)).fit(X, y)
        teacher_history = teacher.run_.history

    student_kw = _model_kwargs(cfg["model"]["student"], data, seed + 1)
    log.info("training baseline student")
    baseline = TinyViTClassifier(**student_kw, alpha=0.0, beta=0.0).fit(X, y)
    log.info("training distilled student")
    distilled = TinyViTClassifier(**student_kw, teacher=teacher, top_k=dcfg["top_k"],
                                  temperature=dcfg["temperature"], alpha=dcfg["alpha"],
                                  beta=dcfg["beta"]).fit(X, y)

    for name, est in (("teacher", teacher), ("baseline", baseline), ("distilled", distilled)):
        est.save(os.path.join(out_dir, name))
    report.write_losses_csv(os.path.join(out_dir, "teacher_losses.csv"), teacher_history)
    report.write_losses_csv(os.path.join(out_dir, "baseline_losses.csv"), baseline.run_.history)
    report.write_losses_csv(os.path.join(out_dir, "losses.csv"), distilled.run_.history)

    profiles = {}
    for name, est in (("teacher", teacher), ("baseline", baseline), ("distilled", distilled)):
        p = est.spectral_profile(probe)
        profiles[name] = p
        report.write_profile_json(os.path.join(out_dir, f"{name}_profile.json"), p)
        report.write_text(os.path.join(out_dir, f"{name}_profile.svg"),
                          report.profile_svg(p, f"{name} spectral profile"))
    report.write_text(os.path.join(out_dir, "compare.svg"), report.line_chart_svg(
        [(name, list(np.linspace(0, 1, p.layer_count)), list(p.intensities / p.intensities.max()))
         for name, p in profiles.items()],
        "normalized spectral profiles", xlabel="relative depth", ylabel="intensity / max"))

    plan = distilled.plan_
    dynamics = {
        "plan": {"teacher_layers": list(plan.teacher_layers), "student_layers": list(plan.student_layers)},
        "profile_distance": {
            "baseline": profile_distance(profiles["teacher"], profiles["baseline"]),
            "distilled": profile_distance(profiles["teacher"], profiles["distilled"]),
        },
        "accuracy": {name: float(est.score(Xv, yv))
                     for name, est in (("teacher", teacher), ("baseline", baseline), ("distilled", distilled))},
        "l_fft": {"initial": distilled.fft_initial_, "final": distilled.fft_final_},
        "config": cfg,
    }
    report.write_json(os.path.join(out_dir, "dynamics.json"), dynamics)
    return dynamics
