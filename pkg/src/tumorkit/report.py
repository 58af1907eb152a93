"""CSV reports and their companion figures.

Every CSV written here can be read back by the reader next to it, and the
figures are rendered with a pinned hash salt and no embedded timestamp so a
rerun reproduces output files byte-for-byte.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import ConfigError
from .metrics import IoUReport, TrainReport

plt.rcParams["svg.hashsalt"] = "tumorkit"
_SAVE_KW = {"metadata": {"Date": None}, "bbox_inches": "tight"}


# -- elbow curve --------------------------------------------------------

def write_elbow_csv(path, ks, wcss_curve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "wcss"])
        for k, value in zip(ks, wcss_curve):
            writer.writerow([k, repr(float(value))])


def read_elbow_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["k", "wcss"]:
            raise ConfigError(f"{path}: not an elbow CSV (header {header!r})")
        rows = [(int(k), float(w)) for k, w in reader]
    return [k for k, _ in rows], [w for _, w in rows]


def plot_elbow(path, ks, wcss_curve, chosen_k) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, wcss_curve, "o-", color="tab:blue")
    ax.axvline(chosen_k, linestyle="--", color="tab:red", label=f"elbow at k={chosen_k}")
    ax.set_xlabel("Number of clusters k")
    ax.set_ylabel("Within-cluster sum of squares")
    ax.set_title("Elbow method")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


# -- training curves ----------------------------------------------------

TRAIN_HEADER = ["epoch", "train_loss", "test_loss", "train_acc", "test_acc"]


class TrainReportWriter:
    """Streams one CSV row per epoch, flushing so partial runs stay usable."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(TRAIN_HEADER)
        self._fh.flush()

    def write_row(self, epoch, train_loss, test_loss, train_acc, test_acc) -> None:
        self._writer.writerow(
            [epoch] + [repr(float(v)) for v in (train_loss, test_loss, train_acc, test_acc)]
        )
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_train_report_csv(path, report: TrainReport) -> None:
    with TrainReportWriter(path) as writer:
        for e in range(report.epochs):
            writer.write_row(
                e + 1,
                report.train_loss[e],
                report.test_loss[e],
                report.train_acc[e],
                report.test_acc[e],
            )


def read_train_report_csv(path) -> TrainReport:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRAIN_HEADER:
            raise ConfigError(f"{path}: not a training report CSV (header {header!r})")
        rows = [[float(v) for v in row[1:]] for row in reader]
    return TrainReport(
        epochs=len(rows),
        train_loss=[r[0] for r in rows],
        test_loss=[r[1] for r in rows],
        train_acc=[r[2] for r in rows],
        test_acc=[r[3] for r in rows],
    )


def _plot_series(path, epochs, train_series, test_series, ylabel, title):
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = range(1, epochs + 1)
    ax.plot(xs, train_series, color="tab:blue", label="train")
    ax.plot(xs, test_series, color="tab:orange", label="test")
    ax.set_xlabel("Epoch")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_accuracy(path, report: TrainReport) -> None:
    _plot_series(path, report.epochs, report.train_acc, report.test_acc,
                 "Accuracy", "Model Accuracy")


def plot_loss(path, report: TrainReport) -> None:
    _plot_series(path, report.epochs, report.train_loss, report.test_loss,
                 "Loss", "Model Loss")


# -- IoU report ---------------------------------------------------------

IOU_HEADER = ["id", "class", "iou", "detected"]


def write_iou_report_csv(path, report: IoUReport) -> None:
    """Rows first, then a '#'-prefixed per-class summary block."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(IOU_HEADER)
        for row in report.per_image:
            writer.writerow([row.id, row.label, repr(float(row.iou)), str(row.detected).lower()])
        fh.write(f"# detect_threshold,{report.detect_threshold!r}\n")
        fh.write("# class,mean_iou_detected,detection_rate,detected,total\n")
        for label, summary in report.per_class.items():
            mean = "" if summary.mean_iou_detected is None else repr(summary.mean_iou_detected)
            fh.write(
                f"# {label},{mean},{summary.detection_rate!r},"
                f"{summary.detected},{summary.total}\n"
            )


def read_iou_report_csv(path):
    """Return the per-image rows as (id, class, iou, detected) tuples."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if line.startswith("#") or not line.strip():
                continue
            parts = next(csv.reader([line]))
            if i == 0:
                if parts != IOU_HEADER:
                    raise ConfigError(f"{path}: not an IoU report CSV (header {parts!r})")
                continue
            rows.append((parts[0], parts[1], float(parts[2]), parts[3] == "true"))
    return rows


def format_class_summaries(report: IoUReport) -> list:
    """Human-readable per-class lines for the console."""
    lines = []
    for label, summary in report.per_class.items():
        mean = "n/a" if summary.mean_iou_detected is None else f"{summary.mean_iou_detected:.4f}"
        lines.append(
            f"{label}: mean IoU over detected = {mean}, detection rate = "
            f"{summary.detection_rate:.4f} ({summary.detected}/{summary.total})"
        )
    return lines
