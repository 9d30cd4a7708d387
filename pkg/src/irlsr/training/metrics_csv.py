"""Metrics CSV: one row per image plus a ``mean`` row per evaluated model."""
import csv
import os

COLUMNS = ["stage", "config", "image", "psnr_db", "ssim", "wall_clock_s"]


def metric_rows(stage: int, config: str, metrics, wall_clock_s: float) -> list:
    rows = [[stage, config, m.name, f"{m.psnr:.6f}", f"{m.ssim:.6f}", f"{wall_clock_s:.3f}"]
            for m in metrics.per_image]
    rows.append([stage, config, "mean", f"{metrics.mean_psnr:.6f}", f"{metrics.mean_ssim:.6f}",
                 f"{wall_clock_s:.3f}"])
    return rows


def write_metrics_csv(path, rows: list, append: bool = False) -> None:
    new = not append or not os.path.exists(path)
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(COLUMNS)
        w.writerows(rows)
