"""Equidistant binning of 1D NMR spectra into bucket features."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

FORMIC_ACID_PPM = 8.463
DEFAULT_RANGE = (9.5, 0.5)
DEFAULT_WIDTH = 0.01
DEFAULT_REFERENCE = (8.5, 8.45)
# water/urea, formic acid, dimethylamine
DEFAULT_EXCLUSIONS = ((6.0, 4.5), (8.47, 8.45), (2.73, 2.72))


@dataclass(frozen=True)
class Spectrum:
    """Points sorted by decreasing ppm."""

    ppm: np.ndarray
    intensity: np.ndarray
    id: str = ""

    def __post_init__(self):
        ppm = np.asarray(self.ppm, dtype=float).ravel()
        inten = np.asarray(self.intensity, dtype=float).ravel()
        if ppm.shape != inten.shape:
            raise DataError(f"spectrum {self.id!r}: ppm and intensity lengths differ")
        if np.any(inten < 0):
            raise DataError(f"spectrum {self.id!r}: negative intensity")
        if ppm.size > 1:
            d = np.diff(ppm)
            if np.all(d > 0):
                ppm, inten = ppm[::-1], inten[::-1]
            elif not np.all(d < 0):
                raise DataError(f"spectrum {self.id!r}: ppm axis must be strictly monotone")
        object.__setattr__(self, "ppm", ppm)
        object.__setattr__(self, "intensity", inten)

    @classmethod
    def read_csv(cls, path, id=None) -> "Spectrum":
        """Two-column (ppm, intensity) CSV; a non-numeric first row is a header."""
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            for k, row in enumerate(csv.reader(fh)):
                if not row:
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if k == 0:
                        continue
                    raise DataError(f"{path}: bad spectrum row {k + 1}") from None
        arr = np.array(rows, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], id=id if id is not None else Path(path).stem)


def reference_shift(s: Spectrum, observed_ref_ppm: float, target_ref_ppm: float = FORMIC_ACID_PPM) -> Spectrum:
    return Spectrum(s.ppm + (target_ref_ppm - observed_ref_ppm), s.intensity, s.id)


def bucket_count(range_high: float, range_low: float, width: float) -> int:
    if not range_high > range_low:
        raise DataError("range_high must exceed range_low")
    if not width > 0:
        raise DataError("bucket width must be positive")
    ratio = (range_high - range_low) / width
    k = round(ratio)
    if abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise DataError(f"range {range_high}-{range_low} is not an integral number of {width} ppm buckets")
    return int(k)


def bucket_centers(range_high=DEFAULT_RANGE[0], range_low=DEFAULT_RANGE[1], width=DEFAULT_WIDTH) -> np.ndarray:
    """Centers from high to low ppm."""
    k = bucket_count(range_high, range_low, width)
    return range_high - width * (np.arange(k) + 0.5)


def _bucket_index(ppm: np.ndarray, range_high: float, width: float, k: int) -> np.ndarray:
    # bucket i covers [high - (i+1)w, high - i w); the [center - w/2, center + w/2)
    # convention makes the top edge exclusive and the low edge inclusive.
    pos = (range_high - ppm) / width
    idx = np.ceil(pos - 1e-9).astype(int) - 1
    idx[(pos <= 1e-9) | (idx >= k)] = -1
    return idx


def bin_spectrum(s: Spectrum, range_high=DEFAULT_RANGE[0], range_low=DEFAULT_RANGE[1],
                 width=DEFAULT_WIDTH) -> np.ndarray:
    """Sum intensities into equidistant buckets ordered from high to low ppm.

    A point belongs to the bucket with ``center - w/2 <= ppm < center + w/2``;
    points outside the range are ignored.
    """
    k = bucket_count(range_high, range_low, width)
    idx = _bucket_index(s.ppm, range_high, width, k)
    keep = idx >= 0
    return np.bincount(idx[keep], weights=s.intensity[keep], minlength=k).astype(float)


@dataclass(frozen=True)
class BucketTable:
    bucket_centers: np.ndarray
    matrix: np.ndarray
    ids: tuple[str, ...] = ()
    excluded: tuple[tuple[float, float], ...] = ()
    width: float = DEFAULT_WIDTH

    @property
    def labels(self) -> list[str]:
        return [f"{c:.3f}" for c in self.bucket_centers]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id"] + self.labels)
            for sid, row in zip(self.ids, self.matrix):
                w.writerow([sid] + [repr(float(x)) for x in row])


def bin_spectra(spectra, range_high=DEFAULT_RANGE[0], range_low=DEFAULT_RANGE[1],
                width=DEFAULT_WIDTH) -> BucketTable:
    rows = [bin_spectrum(s, range_high, range_low, width) for s in spectra]
    return BucketTable(
        bucket_centers=bucket_centers(range_high, range_low, width),
        matrix=np.array(rows).reshape(len(rows), -1),
        ids=tuple(s.id for s in spectra),
        width=width,
    )


def _inside(centers: np.ndarray, interval) -> np.ndarray:
    hi, lo = max(interval), min(interval)
    return (centers >= lo) & (centers < hi)


def exclude_and_scale(bt: BucketTable, exclusions=DEFAULT_EXCLUSIONS,
                      ref_interval=DEFAULT_REFERENCE) -> BucketTable:
    """Divide every row by its summed intensity over ``ref_interval``, then drop
    buckets whose center lies in any exclusion interval ``[low, high)``.

    The reference sum is taken before exclusion, so the reference region may
    overlap an excluded one.
    """
    ref_mask = _inside(bt.bucket_centers, ref_interval)
    ref = bt.matrix[:, ref_mask].sum(axis=1)
    for sid, r in zip(bt.ids or range(len(ref)), ref):
        if not r > 0:
            raise DataError(f"spectrum {sid!r}: zero intensity in reference interval {ref_interval}")
    scaled = bt.matrix / ref[:, None]
    drop = np.zeros(bt.bucket_centers.size, dtype=bool)
    for iv in exclusions:
        drop |= _inside(bt.bucket_centers, iv)
    return BucketTable(
        bucket_centers=bt.bucket_centers[~drop],
        matrix=scaled[:, ~drop],
        ids=bt.ids,
        excluded=bt.excluded + tuple((max(iv), min(iv)) for iv in exclusions),
        width=bt.width,
    )
