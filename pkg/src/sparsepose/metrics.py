"""Evaluation metrics: MPJRE, MPJPE, MPJVE, Jitter, and report tables."""

from dataclasses import dataclass

import numpy as np

from . import body, rotmath

END_EFFECTORS = (10, 11, 15, 22, 23)   # feet, head, hands

REGIONS = {
    "torso": (0, 3, 6, 9),
    "legs": (1, 2, 4, 5, 7, 8, 10, 11),
    "arms": (13, 14, 16, 17, 18, 19, 20, 21, 22, 23),
    "head": (12, 15),
}


@dataclass
class EvalReport:
    mpjre_deg: float
    mpjpe_cm: float
    mpjve_cm: float
    jitter: float                      # 10^2 m/s^3
    mpjre_per_joint: np.ndarray        # (24,)
    mpjpe_per_joint: np.ndarray        # (24,)
    region_mpjpe_cm: dict
    region_mpjre_deg: dict
    end_effector_mpjpe_cm: float
    non_end_effector_mpjpe_cm: float
    frames: int


def _global(pred_local: np.ndarray, gt_local: np.ndarray, skel: body.Skeleton):
    Gp, Pp = body.fk_batched(pred_local, skel)
    Gg, Pg = body.fk_batched(gt_local, skel)
    return Gp, Pp, Gg, Pg


def mpjre(pred_local: np.ndarray, gt_local: np.ndarray, skel: body.Skeleton) -> float:
    """Mean global angular error over frames and joints, degrees."""
    Gp, _, Gg, _ = _global(pred_local, gt_local, skel)
    return float(np.mean(rotmath.geodesic_angle_deg(Gp, Gg)))


def mpjpe(pred_local: np.ndarray, gt_local: np.ndarray, skel: body.Skeleton) -> float:
    """Root-aligned mean joint distance, cm. FK keeps the root at the origin."""
    _, Pp, _, Pg = _global(pred_local, gt_local, skel)
    return float(np.mean(np.linalg.norm(Pp - Pg, axis=-1))) * 100.0


def mpjve(pred_local: np.ndarray, gt_local: np.ndarray, skel: body.Skeleton,
          mesh: body.SkinnedVertexSet) -> float:
    """Root-aligned mean skinned-vertex distance, cm."""
    Gp, Pp, Gg, Pg = _global(pred_local, gt_local, skel)
    total = 0.0
    n = len(pred_local)
    for t in range(n):
        vp = body.skin_vertices(body.FkResult(Gp[t], Pp[t]), skel, mesh)
        vg = body.skin_vertices(body.FkResult(Gg[t], Pg[t]), skel, mesh)
        total += float(np.mean(np.linalg.norm(vp - vg, axis=-1)))
    return total / n * 100.0


def jitter(positions: np.ndarray, fps: float) -> float:
    """Mean jerk magnitude of joint trajectories, in 10^2 m/s^3.

    Third-order central difference; the two edge frames on each side are
    excluded.
    """
    p = np.asarray(positions, dtype=np.float64)
    if len(p) < 5:
        return 0.0
    jerk = (p[4:] - 2.0 * p[3:-1] + 2.0 * p[1:-3] - p[:-4]) * (fps ** 3 / 2.0)
    return float(np.mean(np.linalg.norm(jerk, axis=-1))) / 100.0


def evaluate(pred_local: np.ndarray, gt_local: np.ndarray, skel: body.Skeleton,
             mesh: body.SkinnedVertexSet, fps: float) -> EvalReport:
    """All four metrics plus per-joint and per-region breakdowns."""
    Gp, Pp, Gg, Pg = _global(pred_local, gt_local, skel)
    ang = rotmath.geodesic_angle_deg(Gp, Gg)                 # (T, 24)
    dist = np.linalg.norm(Pp - Pg, axis=-1) * 100.0          # (T, 24)
    ee = np.array(END_EFFECTORS)
    non_ee = np.array([j for j in range(24) if j not in END_EFFECTORS])
    return EvalReport(
        mpjre_deg=float(ang.mean()),
        mpjpe_cm=float(dist.mean()),
        mpjve_cm=mpjve(pred_local, gt_local, skel, mesh),
        jitter=jitter(Pp, fps),
        mpjre_per_joint=ang.mean(axis=0),
        mpjpe_per_joint=dist.mean(axis=0),
        region_mpjpe_cm={r: float(dist[:, list(j)].mean()) for r, j in REGIONS.items()},
        region_mpjre_deg={r: float(ang[:, list(j)].mean()) for r, j in REGIONS.items()},
        end_effector_mpjpe_cm=float(dist[:, ee].mean()),
        non_end_effector_mpjpe_cm=float(dist[:, non_ee].mean()),
        frames=len(pred_local),
    )


def evaluate_streams(pairs, skel: body.Skeleton, mesh: body.SkinnedVertexSet,
                     fps: float) -> EvalReport:
    """Evaluate several (pred, gt) streams as one report.

    Frame-mean metrics use the concatenation; jitter is computed per stream
    (its stencil must not straddle boundaries) and frame-weighted.
    """
    pred = np.concatenate([p for p, _ in pairs])
    gt = np.concatenate([g for _, g in pairs])
    report = evaluate(pred, gt, skel, mesh, fps)
    jitters, weights = [], []
    for p, _ in pairs:
        _, Pp = body.fk_batched(p, skel)
        jitters.append(jitter(Pp, fps))
        weights.append(max(len(p) - 4, 0))
    if sum(weights):
        report.jitter = float(np.average(jitters, weights=weights))
    return report


def format_report(report: EvalReport, joint_names=body.JOINT_NAMES) -> str:
    lines = [
        f"frames evaluated      {report.frames}",
        f"MPJRE (deg)           {report.mpjre_deg:8.3f}",
        f"MPJPE (cm)            {report.mpjpe_cm:8.3f}",
        f"MPJVE (cm)            {report.mpjve_cm:8.3f}",
        f"Jitter (1e2 m/s^3)    {report.jitter:8.3f}",
        "",
        "region         MPJPE cm   MPJRE deg",
    ]
    for r in REGIONS:
        lines.append(f"{r:12s} {report.region_mpjpe_cm[r]:10.3f} "
                     f"{report.region_mpjre_deg[r]:11.3f}")
    lines.append("")
    lines.append(f"end-effectors MPJPE    {report.end_effector_mpjpe_cm:8.3f} cm")
    lines.append(f"other joints MPJPE     {report.non_end_effector_mpjpe_cm:8.3f} cm")
    lines.append("")
    lines.append("joint           MPJPE cm   MPJRE deg")
    for j, name in enumerate(joint_names):
        lines.append(f"{name:14s} {report.mpjpe_per_joint[j]:9.3f} "
                     f"{report.mpjre_per_joint[j]:11.3f}")
    return "\n".join(lines)


def report_to_kv(report: EvalReport) -> str:
    """Machine-readable key=value serialization."""
    rows = [
        ("frames", report.frames),
        ("mpjre_deg", report.mpjre_deg),
        ("mpjpe_cm", report.mpjpe_cm),
        ("mpjve_cm", report.mpjve_cm),
        ("jitter_100ms3", report.jitter),
        ("end_effector_mpjpe_cm", report.end_effector_mpjpe_cm),
        ("non_end_effector_mpjpe_cm", report.non_end_effector_mpjpe_cm),
    ]
    rows += [(f"region_{r}_mpjpe_cm", v) for r, v in report.region_mpjpe_cm.items()]
    rows += [(f"region_{r}_mpjre_deg", v) for r, v in report.region_mpjre_deg.items()]
    rows += [(f"joint_{body.JOINT_NAMES[j]}_mpjpe_cm", report.mpjpe_per_joint[j])
             for j in range(24)]
    return "\n".join(f"{k}={v}" for k, v in rows) + "\n"
