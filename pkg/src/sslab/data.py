"""Dataset manifests, patient-level partitioning, and synthetic image data.

The synthetic generator draws, per image, a hidden statistic s that is
N(0, 1) for class F and N(delta, 1) for class M, and embeds it as the
coefficient of a radially symmetric brightness tilt inside a rendered
fundus-like disc (falloff, optic-disc blob mirrored between eyes, random
walk vessel strokes, pixel noise).  Because s is the only class-dependent
quantity, the best attainable AUC of any classifier on these images is
the normal-overlap value Phi(delta / sqrt(2)).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

EYES = ("L", "R")
SEXES = ("F", "M")
PARTITIONS = ("train", "val", "test")
QUALITY_FLAGS = frozenset({"illumination", "field_definition", "artifacts", "validity", "compositeness"})


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    patient_id: str
    eye: str
    sex: str
    image_path: str
    partition: str = "unassigned"
    quality_flags: frozenset = frozenset()

    def __post_init__(self):
        if self.eye not in EYES:
            raise ManifestError(f"eye must be L or R, got {self.eye!r}")
        if self.sex not in SEXES:
            raise ManifestError(f"sex must be F or M, got {self.sex!r}")
        if self.partition not in PARTITIONS + ("unassigned",):
            raise ManifestError(f"bad partition {self.partition!r}")
        bad = set(self.quality_flags) - QUALITY_FLAGS
        if bad:
            raise ManifestError(f"unknown quality flags {sorted(bad)}")

    @property
    def sample_id(self) -> str:
        return f"{self.patient_id}_{self.eye}"

    @property
    def label(self) -> int:
        return 0 if self.sex == "F" else 1


class Manifest:
    """Immutable collection of entries; one partition per patient."""

    def __init__(self, entries):
        self.entries = tuple(entries)
        seen = set()
        parts: dict[str, str] = {}
        for e in self.entries:
            key = (e.patient_id, e.eye)
            if key in seen:
                raise ManifestError(f"duplicate (patient, eye) pair {key}")
            seen.add(key)
            prev = parts.setdefault(e.patient_id, e.partition)
            if prev != e.partition:
                raise ManifestError(f"patient {e.patient_id!r} straddles partitions {prev!r}/{e.partition!r}")

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def patients(self) -> dict[str, list[ManifestEntry]]:
        out: dict[str, list[ManifestEntry]] = {}
        for e in self.entries:
            out.setdefault(e.patient_id, []).append(e)
        return out

    def partition(self, name: str) -> list[ManifestEntry]:
        if name == "all":
            return list(self.entries)
        return [e for e in self.entries if e.partition == name]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["patient_id", "eye", "sex", "image_path", "partition", "quality_flags"])
            for e in self.entries:
                writer.writerow(
                    [e.patient_id, e.eye, e.sex, e.image_path, e.partition, ";".join(sorted(e.quality_flags))]
                )

    @classmethod
    def from_csv(cls, path) -> "Manifest":
        entries = []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["patient_id", "eye", "sex", "image_path", "partition", "quality_flags"]:
                raise ManifestError(f"bad manifest header in {path}: {header}")
            for row in reader:
                if not row:
                    continue
                pid, eye, sex, image_path, partition, flags = row
                entries.append(
                    ManifestEntry(
                        patient_id=pid,
                        eye=eye,
                        sex=sex,
                        image_path=image_path,
                        partition=partition,
                        quality_flags=frozenset(f for f in flags.split(";") if f),
                    )
                )
        return cls(entries)


@dataclass(frozen=True)
class PartitionSpec:
    proportions: tuple[float, float, float] = (0.7, 0.15, 0.15)
    seed: int = 0

    def __post_init__(self):
        p = self.proportions
        if len(p) != 3 or any(x < 0 for x in p):
            raise ValueError(f"proportions must be 3 nonnegative fractions, got {p}")
        if abs(sum(p) - 1.0) > 1e-12:
            raise ValueError(f"proportions must sum to 1, got {sum(p)}")


def _largest_remainder(total: int, proportions) -> list[int]:
    """Integer counts closest to total*p, leftovers by largest fractional
    part with ties resolved toward the front (train first)."""
    quotas = [total * p for p in proportions]
    counts = [int(math.floor(q)) for q in quotas]
    leftovers = total - sum(counts)
    order = sorted(range(len(quotas)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in order[:leftovers]:
        counts[k] += 1
    return counts


def split_patients(manifest: Manifest, spec: PartitionSpec) -> Manifest:
    """Assign whole patients to train/val/test, stratified by sex.

    Partition sizes follow the largest-remainder rule on patient counts;
    within each partition the female count is the largest-remainder match
    to the aggregate sex ratio.  Patients are shuffled within sex by the
    spec seed and sliced, so both eyes always land together and the
    assignment is a pure function of (manifest, seed).
    """
    patients = manifest.patients()
    by_sex: dict[str, list[str]] = {"F": [], "M": []}
    for pid in sorted(patients):
        by_sex[patients[pid][0].sex].append(pid)
    if not by_sex["F"] or not by_sex["M"]:
        raise ManifestError("need at least one patient of each sex")
    n = len(patients)
    totals = _largest_remainder(n, spec.proportions)
    for count, p in zip(totals, spec.proportions):
        if p > 0 and count == 0:
            raise ManifestError(f"proportions {spec.proportions} infeasible for {n} patients")

    n_f = len(by_sex["F"])
    f_counts = _largest_remainder_constrained(totals, n_f, n)
    m_counts = [t - f for t, f in zip(totals, f_counts)]
    if any(c < 0 for c in m_counts):
        raise ManifestError("sex composition infeasible for requested proportions")

    rng = np.random.default_rng(np.random.SeedSequence([spec.seed]))
    assignment: dict[str, str] = {}
    for sex, counts in (("F", f_counts), ("M", m_counts)):
        ids = list(by_sex[sex])
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        pos = 0
        for part, count in zip(PARTITIONS, counts):
            for pid in shuffled[pos : pos + count]:
                assignment[pid] = part
            pos += count
    return Manifest(replace(e, partition=assignment[e.patient_id]) for e in manifest)


def _largest_remainder_constrained(totals, n_f: int, n: int) -> list[int]:
    """Female counts per partition: largest-remainder on totals*n_f/n with
    the row sum pinned to n_f and each count clamped to [0, total]."""
    quotas = [t * n_f / n for t in totals]
    counts = [min(t, int(math.floor(q))) for t, q in zip(totals, quotas)]
    leftovers = n_f - sum(counts)
    order = sorted(range(len(quotas)), key=lambda k: (-(quotas[k] - counts[k]), k))
    i = 0
    while leftovers > 0 and i < len(order):
        k = order[i]
        if counts[k] < totals[k]:
            counts[k] += 1
            leftovers -= 1
        i += 1
    if leftovers != 0:
        raise ManifestError("could not allocate sex counts within partition totals")
    return counts


def dataset_stats(manifest: Manifest) -> dict:
    """Image and patient counts per partition, stratified by sex."""
    parts = PARTITIONS + ("total",)
    table = {
        kind: {part: {"F": 0, "M": 0, "all": 0} for part in parts}
        for kind in ("images", "patients")
    }
    for e in manifest:
        for part in (e.partition, "total"):
            if part not in table["images"]:
                continue
            table["images"][part][e.sex] += 1
            table["images"][part]["all"] += 1
    for pid, entries in manifest.patients().items():
        sex, part = entries[0].sex, entries[0].partition
        for p in (part, "total"):
            if p not in table["patients"]:
                continue
            table["patients"][p][sex] += 1
            table["patients"][p]["all"] += 1
    return table


def format_stats(table: dict) -> str:
    lines = []
    header = f"{'':<10}" + "".join(f"{p:>8}" for p in PARTITIONS + ("total",))
    for kind in ("images", "patients"):
        lines.append(kind)
        lines.append(header)
        for sex in ("all", "F", "M"):
            row = f"  {sex:<8}" + "".join(f"{table[kind][p][sex]:>8}" for p in PARTITIONS + ("total",))
            lines.append(row)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# synthetic fundus-like data

@dataclass(frozen=True)
class SyntheticSpec:
    n_patients: int
    separability_delta: float
    image_size: int = 64
    seed: int = 0
    vessel_density: float = 1.0  # texture knob for distribution-shift datasets

    def __post_init__(self):
        if self.n_patients < 2:
            raise ValueError("need at least 2 patients (one per sex)")
        if self.separability_delta < 0:
            raise ValueError("separability_delta must be >= 0")
        if self.image_size < 8:
            raise ValueError("image_size too small")


def bayes_auc(delta: float) -> float:
    """Best attainable AUC of the planted statistic: Phi(delta / sqrt 2)."""
    return 0.5 * (1.0 + math.erf(delta / 2.0))


def _render_fundus(size: int, rng, tilt: float, eye: str, vessel_density: float) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    cy = cx = (size - 1) / 2.0
    r = np.hypot(yy - cy, xx - cx) / (size / 2.0)
    disc = r <= 0.95

    img = 0.50 * (1.0 - 0.40 * r**2)

    # optic-disc blob sits nasally: left third for L, mirrored for R
    ox = 0.30 * size if eye == "L" else 0.70 * size
    oy = cy + rng.normal(0.0, 0.02 * size)
    ox = ox + rng.normal(0.0, 0.02 * size)
    sigma = 0.07 * size
    blob = np.exp(-((yy - oy) ** 2 + (xx - ox) ** 2) / (2.0 * sigma**2))
    img += 0.35 * blob

    # vessels: arcs leaving the disc rim and drifting outward
    n_vessels = max(1, int(round(6 * vessel_density)))
    steps = max(4, int(0.9 * size * min(1.0, vessel_density)))
    for _ in range(n_vessels):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        py = oy + 1.5 * sigma * np.sin(angle)
        px = ox + 1.5 * sigma * np.cos(angle)
        for _ in range(steps):
            angle += rng.normal(0.0, 0.25)
            py += np.sin(angle)
            px += np.cos(angle)
            iy, ix = int(round(py)), int(round(px))
            if 0 <= iy < size and 0 <= ix < size:
                img[max(0, iy - 1) : iy + 1, max(0, ix - 1) : ix + 1] -= 0.10

    # planted signal: tilt coefficient on a zero-crossing radial profile
    img += 0.10 * tilt * (0.5 - r)

    img += rng.normal(0.0, 0.02, img.shape)
    img = np.where(disc, img, 0.0)
    return np.clip(img, 0.0, 1.0)


def generate_synthetic(spec: SyntheticSpec, out_dir) -> tuple[Manifest, dict[str, float]]:
    """Write PNGs and return the unpartitioned manifest plus ground truth.

    Layout: <out_dir>/<patient_id>_<eye>.png, 8-bit grayscale replicated
    to three channels.  Per-patient RNG streams derive from (seed, index)
    so generation is order-independent and byte-reproducible.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(spec.n_patients)))
    entries = []
    ground_truth: dict[str, float] = {}
    for i in range(spec.n_patients):
        # token is scoped by the generation seed so independently generated
        # datasets never share patient ids
        pid = f"s{spec.seed}p{i:0{width}d}"
        sex = "F" if i % 2 == 0 else "M"
        mean = 0.0 if sex == "F" else spec.separability_delta
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, i]))
        for eye in EYES:
            s = rng.normal(mean, 1.0)
            img = _render_fundus(spec.image_size, rng, s, eye, spec.vessel_density)
            quantized = np.round(img * 255.0).astype(np.uint8)
            rgb = np.repeat(quantized[:, :, None], 3, axis=2)
            name = f"{pid}_{eye}.png"
            Image.fromarray(rgb, mode="RGB").save(out_dir / name)
            entries.append(ManifestEntry(patient_id=pid, eye=eye, sex=sex, image_path=name))
            ground_truth[f"{pid}_{eye}"] = float(s)
    return Manifest(entries), ground_truth


def write_ground_truth(ground_truth: dict[str, float], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("id,statistic\n")
        for sid in ground_truth:
            fh.write(f"{sid},{ground_truth[sid]!r}\n")


def load_image(path) -> np.ndarray:
    """Decode a PNG to float64 (3, H, W) in [0, 1]; grayscale is replicated."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def load_images(manifest: Manifest, root) -> dict[str, np.ndarray]:
    root = Path(root)
    return {e.sample_id: load_image(root / e.image_path) for e in manifest}
