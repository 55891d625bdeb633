"""CSV schemas, SVG rendering glue, and the output-directory manifest.

Trace CSVs carry a versioned header comment with episode metadata (robot
mass, gravity, gap intervals) so plots and metrics can be regenerated from
the file alone.
"""

import csv
import hashlib
import io
import json
import os

import numpy as np

from .metrics import EvalReport, Trace
from .plots import bar_chart, line_panels

TRACE_VERSION = 1
BREAKDOWN_KEYS = ("forward", "gap_bonus", "gap_penalty", "lateral",
                  "orientation", "power")
LIMBS = ("FR", "FL", "RR", "RL")


def trace_to_csv(trace: Trace, gaps=None) -> str:
    k = trace.actions.shape[1]
    meta = {"version": TRACE_VERSION, "mass": trace.mass,
            "gravity": trace.gravity, "action_dim": k,
            "gaps": [list(g) for g in (gaps or [])]}
    cols = (["time", "base_x", "base_z", "pitch", "vx", "vz", "pitch_rate"]
            + [f"foot_x_{l}" for l in LIMBS] + [f"foot_z_{l}" for l in LIMBS]
            + [f"contact_{l}" for l in LIMBS]
            + [f"r_{l}" for l in LIMBS] + [f"r_dot_{l}" for l in LIMBS]
            + [f"theta_{l}" for l in LIMBS] + [f"theta_dot_{l}" for l in LIMBS]
            + [f"action_{i}" for i in range(k)]
            + [f"mu_{l}" for l in LIMBS] + [f"omega_{l}" for l in LIMBS]
            + [f"x_off_{l}" for l in LIMBS] + [f"z_off_{l}" for l in LIMBS]
            + [f"tau_{j}" for j in range(8)] + [f"qd_{j}" for j in range(8)]
            + ["reward"] + [f"rw_{kk}" for kk in BREAKDOWN_KEYS])
    buf = io.StringIO()
    buf.write(f"# gapcross trace {json.dumps(meta, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    T = trace.times.shape[0]
    for t in range(T):
        row = ([trace.times[t]] + list(trace.base[t]) + list(trace.base_vel[t])
               + list(trace.foot_pos[t, :, 0]) + list(trace.foot_pos[t, :, 1])
               + list(trace.contact[t])
               + list(trace.cpg[t]) + list(trace.actions[t])
               + list(trace.drive[t]) + list(trace.torques[t])
               + list(trace.joint_rates[t])
               + [trace.reward[t]] + list(trace.breakdown[t]))
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def trace_from_csv(text: str):
    """Returns (Trace, gaps)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# gapcross trace "):
        raise ValueError("not a gapcross trace CSV")
    meta = json.loads(lines[0][len("# gapcross trace "):])
    if meta["version"] != TRACE_VERSION:
        raise ValueError(f"unsupported trace version {meta['version']}")
    k = meta["action_dim"]
    rows = list(csv.reader(lines[1:]))
    header, data_rows = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in data_rows])
    col = {name: i for i, name in enumerate(header)}

    def block(names):
        return data[:, [col[n] for n in names]]

    trace = Trace(
        times=data[:, col["time"]],
        torques=block([f"tau_{j}" for j in range(8)]),
        joint_rates=block([f"qd_{j}" for j in range(8)]),
        base=block(["base_x", "base_z", "pitch"]),
        base_vel=block(["vx", "vz", "pitch_rate"]),
        foot_pos=np.stack([block([f"foot_x_{l}" for l in LIMBS]),
                           block([f"foot_z_{l}" for l in LIMBS])], axis=2),
        cpg=block([f"r_{l}" for l in LIMBS] + [f"r_dot_{l}" for l in LIMBS]
                  + [f"theta_{l}" for l in LIMBS]
                  + [f"theta_dot_{l}" for l in LIMBS]),
        actions=block([f"action_{i}" for i in range(k)]),
        drive=block([f"mu_{l}" for l in LIMBS] + [f"omega_{l}" for l in LIMBS]
                    + [f"x_off_{l}" for l in LIMBS]
                    + [f"z_off_{l}" for l in LIMBS]),
        reward=data[:, col["reward"]],
        breakdown=block([f"rw_{kk}" for kk in BREAKDOWN_KEYS]),
        contact=block([f"contact_{l}" for l in LIMBS]),
        mass=meta["mass"], gravity=meta["gravity"])
    gaps = [tuple(g) for g in meta.get("gaps", [])]
    return trace, gaps


def rollout_svg(trace: Trace, gaps) -> str:
    """Body velocity, foot positions, and front-left drive signals over time
    with gap-exposure intervals shaded."""
    t = trace.times
    spans = _gap_exposure_spans(trace, gaps, leg=1)
    panels = [
        {"ylabel": "body velocity [m/s]",
         "series": [("vx", t, trace.base_vel[:, 0])]},
        {"ylabel": "foot x [m]",
         "series": [(f"foot_x {l}", t, trace.foot_pos[:, i, 0])
                    for i, l in enumerate(LIMBS)]},
        {"ylabel": "foot z [m]",
         "series": [(f"foot_z {l}", t, trace.foot_pos[:, i, 1])
                    for i, l in enumerate(LIMBS)]},
        {"ylabel": "FL drive",
         "series": [("mu FL", t, trace.drive[:, 1]),
                    ("omega FL [Hz]", t, trace.drive[:, 5]),
                    ("x_off FL [m]", t, trace.drive[:, 9])]},
    ]
    return line_panels(panels, title="episode rollout", shaded_spans=spans)


def _gap_exposure_spans(trace: Trace, gaps, leg: int):
    """Time intervals during which the given foot is horizontally over a gap."""
    spans = []
    if not gaps:
        return spans
    xs = trace.foot_pos[:, leg, 0]
    over = np.zeros(xs.shape[0], dtype=bool)
    for s, e in gaps:
        over |= (xs >= s) & (xs < e)
    start = None
    for i, flag in enumerate(over):
        if flag and start is None:
            start = trace.times[i]
        elif not flag and start is not None:
            spans.append((start, trace.times[i]))
            start = None
    if start is not None:
        spans.append((start, trace.times[-1]))
    return spans


def metrics_svg(rows: list[dict]) -> str:
    t = [r["samples"] for r in rows]
    panels = [
        {"ylabel": "mean return",
         "series": [("mean_return", t, [r["mean_return"] for r in rows])]},
        {"ylabel": "success [%]",
         "series": [("success_rate", t, [r["success_rate"] for r in rows])]},
        {"ylabel": "kl / lr",
         "series": [("kl", t, [r["kl"] for r in rows]),
                    ("lr", t, [r["lr"] for r in rows])]},
    ]
    return line_panels(panels, title="training metrics")


def read_metrics_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return [{k: float(v) for k, v in row.items()} for row in reader]


# -- evaluation reports -------------------------------------------------------

def report_to_csv(report: EvalReport, label: str = "") -> str:
    buf = io.StringIO()
    buf.write("# gapcross eval report v1\n")
    writer = csv.writer(buf, lineterminator="\n")
    names = [n for n, _ in report.summary_rows()]
    writer.writerow(["label"] + names)
    writer.writerow([label] + [repr(v) for _, v in report.summary_rows()])
    return buf.getvalue()


def rollouts_to_csv(report: EvalReport) -> str:
    buf = io.StringIO()
    buf.write("# gapcross eval rollouts v1\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["seed", "gaps_crossed", "n_gaps", "distance", "duration",
                     "energy", "mean_abs_pitch_rate", "fall", "fault",
                     "ep_return"])
    for r in report.records:
        writer.writerow([r.seed, r.gaps_crossed, r.n_gaps, repr(r.distance),
                         repr(r.duration), repr(r.energy),
                         repr(r.mean_abs_pitch_rate), int(r.fall),
                         int(r.fault), repr(r.ep_return)])
    return buf.getvalue()


def report_table(report: EvalReport, label: str = "") -> str:
    lines = [f"evaluation report{': ' + label if label else ''}",
             "-" * 44]
    for name, value in report.summary_rows():
        lines.append(f"{name:<36} {value:>10.4g}")
    return "\n".join(lines)


def sweep_table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write("# gapcross sweep report v1\n")
    cols = ["id", "label", "success_rate_pct", "cot", "froude",
            "mean_body_angular_velocity", "mean_velocity", "mean_return",
            "n_rollouts"]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([row["id"], row["label"]]
                        + [repr(float(row[c])) for c in cols[2:]])
    return buf.getvalue()


def sweep_svg(rows: list[dict], title: str) -> str:
    labels = [str(r["id"]) for r in rows]
    return bar_chart(labels, [r["success_rate_pct"] for r in rows],
                     ylabel="success [%]", title=title,
                     second_values=[r["cot"] for r in rows],
                     second_label="CoT")


# -- manifest -----------------------------------------------------------------

def write_manifest(out_dir: str) -> dict:
    """Hash every artifact under out_dir into manifest.json."""
    entries = {}
    for root, _, files in os.walk(out_dir):
        for name in sorted(files):
            if name == "manifest.json":
                continue
            path = os.path.join(root, name)
            rel = os.path.relpath(path, out_dir)
            h = hashlib.sha256()
            with open(path, "rb") as fh:
                for chunk in iter(lambda: fh.read(1 << 20), b""):
                    h.update(chunk)
            entries[rel] = h.hexdigest()
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump({"version": 1, "files": entries}, fh, indent=2,
                  sort_keys=True)
    return entries
