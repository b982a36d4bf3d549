"""Synthetic patient cohorts: an image volume with one planted lesion
blob, plausible clinical covariates, and a binary recurrence label.

Labels come from a planted latent model.  Each patient gets an image
latent driving the blob's intensity and size, and a linear combination
of selected clinical covariates (low hemoglobin and albumin, high TNM
stage, smoking, long treatment).  The latent score is

    score = signal_strength * mix(clinical combo, image latent) + noise,

thresholded at the cohort median and flipped with probability
`label_noise`.  At signal_strength 0 the labels are pure noise,
independent of every feature; large values make the cohort separable
from the encoded clinical vector alone.

Data card (simulation inputs, nominal mean/sd and clip range):

    hemoglobin            N(13.5, 1.5)  g/dL    [5, 20]
    lymphocytes           N(1.8, 0.6)   Giga/L  [0.2, 6]
    leucocytes            N(7.0, 2.0)   Giga/L  [1, 25]
    thrombocytes          N(280, 70)    Giga/L  [20, 800]
    albumin               N(40, 5)      g/L     [15, 60]
    treatment_duration    N(45, 8)      days    [15, 90]
    num_fractions         uniform integer 25..35
    avg_dose_per_fraction N(2.0, 0.12)  Gy      [1.6, 2.4]
    total_dose            fractions * dose/fraction * (1 + U(-0.04, 0.04))
    weight_start          N(75, 12)     kg      [35, 140]
    weight_end            weight_start - |N(3.5, 2.5)|, floor 30

Qualitative category probabilities differ slightly between the
head-neck-like and lung-like presets (smoking and chemotherapy rates).
These ranges are plausible physiology for simulation only, not claims
about any real cohort.
"""

from __future__ import annotations

import csv
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DomainError,
    InsufficientData,
    InvalidConfig,
    MissingStats,
    VersionMismatch,
)

log = logging.getLogger(__name__)

QUANTITATIVE_FIELDS = (
    "hemoglobin",
    "lymphocytes",
    "leucocytes",
    "thrombocytes",
    "albumin",
    "treatment_duration",
    "total_dose",
    "num_fractions",
    "avg_dose_per_fraction",
    "weight_start",
    "weight_end",
)

GENDERS = ("M", "F")
TABACOLOGY = ("smoker", "non-smoker", "former-smoker")
YES_NO = ("yes", "no")

#: Length of the encoded clinical vector: 11 z-scores, 9 one-hot slots,
#: 3 scaled TNM ordinals.
ENCODED_DIM = 23

COHORT_KINDS = ("head-neck-like", "lung-like")

MANIFEST_HEADER = [
    "id",
    "volume_path",
    "recurrence",
    *QUANTITATIVE_FIELDS,
    "gender",
    "tabacology",
    "induction_chemo",
    "concomitant_chemo",
    "tnm_t",
    "tnm_n",
    "tnm_m",
]

VOLUME_MAGIC = b"THCV"
VOLUME_VERSION = 1

# Category probabilities per cohort kind.
_KIND_PARAMS = {
    "head-neck-like": {
        "p_male": 0.7,
        "tabacology": (0.45, 0.25, 0.30),
        "p_induction": 0.4,
        "p_concomitant": 0.65,
    },
    "lung-like": {
        "p_male": 0.6,
        "tabacology": (0.55, 0.15, 0.30),
        "p_induction": 0.3,
        "p_concomitant": 0.55,
    },
}

_TNM_T_PROBS = (0.05, 0.20, 0.35, 0.25, 0.15)
_TNM_N_PROBS = (0.35, 0.30, 0.20, 0.15)
_TNM_M_PROBS = (0.92, 0.08)

# Latent-score weights over standardized covariates (see module docstring).
_SCORE_WEIGHTS = {
    "hemoglobin": -0.8,
    "albumin": -0.6,
    "treatment_duration": 0.4,
    "tnm_t": 0.7,
    "tnm_n": 0.5,
    "smoker": 0.5,
}
_IMG_MIX_WEIGHT = 0.03


@dataclass(frozen=True)
class QuantitativeClinical:
    hemoglobin: float
    lymphocytes: float
    leucocytes: float
    thrombocytes: float
    albumin: float
    treatment_duration: float
    total_dose: float
    num_fractions: int
    avg_dose_per_fraction: float
    weight_start: float
    weight_end: float

    def __post_init__(self):
        for name in QUANTITATIVE_FIELDS:
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")
        if self.num_fractions < 1:
            raise DomainError("num_fractions must be >= 1")


@dataclass(frozen=True)
class QualitativeClinical:
    gender: str
    tabacology: str
    induction_chemo: str
    concomitant_chemo: str
    tnm: tuple[int, int, int]

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise DomainError(f"gender must be one of {GENDERS}")
        if self.tabacology not in TABACOLOGY:
            raise DomainError(f"tabacology must be one of {TABACOLOGY}")
        if self.induction_chemo not in YES_NO or self.concomitant_chemo not in YES_NO:
            raise DomainError("chemotherapy flags must be 'yes' or 'no'")
        t, n, m = self.tnm
        if not (0 <= t <= 4 and 0 <= n <= 3 and 0 <= m <= 1):
            raise DomainError(f"TNM out of range: {self.tnm}")


@dataclass
class PatientRecord:
    id: str
    volume: np.ndarray  # (H, W, C) float32 intensities in [0, 1]
    quantitative: QuantitativeClinical
    qualitative: QualitativeClinical
    recurrence: int


@dataclass(frozen=True)
class CohortConfig:
    n_patients: int
    cohort_kind: str = "head-neck-like"
    image_shape: tuple[int, int, int] = (32, 32, 1)
    signal_strength: float = 3.0
    label_noise: float = 0.05
    seed: int = 0

    def validate(self):
        if self.n_patients < 10:
            raise InvalidConfig("n_patients must be >= 10")
        if self.cohort_kind not in COHORT_KINDS:
            raise InvalidConfig(f"cohort_kind must be one of {COHORT_KINDS}")
        h, w, c = self.image_shape
        if h < 16 or w < 16 or c < 1 or h % 8 or w % 8:
            raise InvalidConfig(
                "image H and W must be >= 16 and divisible by 8 (three "
                f"encoder levels), got {self.image_shape}"
            )
        if self.signal_strength < 0:
            raise InvalidConfig("signal_strength must be >= 0")
        if not 0.0 <= self.label_noise <= 0.5:
            raise InvalidConfig("label_noise must lie in [0, 0.5]")


#: Named starting points for CohortConfig; CLI flags override fields.
PRESETS = {
    "head-neck-like": dict(n_patients=434, cohort_kind="head-neck-like",
                           signal_strength=3.0, label_noise=0.05),
    "lung-like": dict(n_patients=146, cohort_kind="lung-like",
                      signal_strength=3.0, label_noise=0.05),
    "separable": dict(n_patients=200, cohort_kind="head-neck-like",
                      signal_strength=30.0, label_noise=0.0),
    "chance": dict(n_patients=200, cohort_kind="head-neck-like",
                   signal_strength=0.0, label_noise=0.0),
}


def _cat_stats(probs):
    vals = np.arange(len(probs), dtype=np.float64)
    p = np.asarray(probs, dtype=np.float64)
    mean = float(vals @ p)
    var = float((vals - mean) ** 2 @ p)
    return mean, math.sqrt(var)


def _clipped_normal(rng, mean, sd, lo, hi):
    return float(np.clip(rng.normal(mean, sd), lo, hi))


def _render_volume(rng, shape, img_latent):
    """Background noise plus one Gaussian-profile ellipse whose intensity
    and radius grow with the image latent."""
    h, w, c = shape
    lat = float(np.clip(img_latent, -2.5, 2.5))
    cy = rng.uniform(0.3, 0.7) * h
    cx = rng.uniform(0.3, 0.7) * w
    r1 = max(1.5, (0.10 + 0.02 * lat) * min(h, w))
    r2 = r1 * rng.uniform(0.6, 1.0)
    theta = rng.uniform(0.0, math.pi)
    intensity = float(np.clip(0.5 + 0.14 * lat, 0.1, 0.9))

    yy, xx = np.mgrid[0:h, 0:w]
    dy = yy - cy
    dx = xx - cx
    u = (dx * math.cos(theta) + dy * math.sin(theta)) / r1
    v = (-dx * math.sin(theta) + dy * math.cos(theta)) / r2
    blob = intensity * np.exp(-0.5 * (u * u + v * v))
    background = 0.12 + 0.04 * rng.random((h, w))
    plane = np.clip(background + blob, 0.0, 1.0)
    return np.repeat(plane[:, :, None], c, axis=2).astype(np.float32)


def _draw_patient(rng, kind_params):
    quant = QuantitativeClinical(
        hemoglobin=_clipped_normal(rng, 13.5, 1.5, 5, 20),
        lymphocytes=_clipped_normal(rng, 1.8, 0.6, 0.2, 6),
        leucocytes=_clipped_normal(rng, 7.0, 2.0, 1, 25),
        thrombocytes=_clipped_normal(rng, 280, 70, 20, 800),
        albumin=_clipped_normal(rng, 40, 5, 15, 60),
        treatment_duration=_clipped_normal(rng, 45, 8, 15, 90),
        total_dose=0.0,  # placeholder, replaced below
        num_fractions=int(rng.integers(25, 36)),
        avg_dose_per_fraction=_clipped_normal(rng, 2.0, 0.12, 1.6, 2.4),
        weight_start=_clipped_normal(rng, 75, 12, 35, 140),
        weight_end=0.0,
    )
    total = quant.num_fractions * quant.avg_dose_per_fraction * (1.0 + rng.uniform(-0.04, 0.04))
    weight_end = max(30.0, quant.weight_start - abs(rng.normal(3.5, 2.5)))
    quant = QuantitativeClinical(
        **{
            **{f: getattr(quant, f) for f in QUANTITATIVE_FIELDS},
            "total_dose": total,
            "weight_end": weight_end,
        }
    )
    qual = QualitativeClinical(
        gender="M" if rng.random() < kind_params["p_male"] else "F",
        tabacology=TABACOLOGY[rng.choice(3, p=kind_params["tabacology"])],
        induction_chemo="yes" if rng.random() < kind_params["p_induction"] else "no",
        concomitant_chemo="yes" if rng.random() < kind_params["p_concomitant"] else "no",
        tnm=(
            int(rng.choice(5, p=_TNM_T_PROBS)),
            int(rng.choice(4, p=_TNM_N_PROBS)),
            int(rng.choice(2, p=_TNM_M_PROBS)),
        ),
    )
    return quant, qual


def _clinical_combo(quant, qual, p_smoker):
    """Standardized linear combination of the selected covariates."""
    t_mean, t_sd = _cat_stats(_TNM_T_PROBS)
    n_mean, n_sd = _cat_stats(_TNM_N_PROBS)
    smoker = 1.0 if qual.tabacology == "smoker" else 0.0
    z = {
        "hemoglobin": (quant.hemoglobin - 13.5) / 1.5,
        "albumin": (quant.albumin - 40.0) / 5.0,
        "treatment_duration": (quant.treatment_duration - 45.0) / 8.0,
        "tnm_t": (qual.tnm[0] - t_mean) / t_sd,
        "tnm_n": (qual.tnm[1] - n_mean) / n_sd,
        "smoker": (smoker - p_smoker) / math.sqrt(p_smoker * (1.0 - p_smoker)),
    }
    w = _SCORE_WEIGHTS
    norm = math.sqrt(sum(v * v for v in w.values()))
    return sum(w[k] * z[k] for k in w) / norm


def generate_cohort(config: CohortConfig) -> list[PatientRecord]:
    """Generate a deterministic synthetic cohort from the config seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    kind_params = _KIND_PARAMS[config.cohort_kind]
    p_smoker = kind_params["tabacology"][0]
    n = config.n_patients

    quants, quals, volumes, combos, img_latents = [], [], [], [], []
    for _ in range(n):
        quant, qual = _draw_patient(rng, kind_params)
        img_latent = float(rng.standard_normal())
        volumes.append(_render_volume(rng, config.image_shape, img_latent))
        quants.append(quant)
        quals.append(qual)
        img_latents.append(img_latent)
        combos.append(_clinical_combo(quant, qual, p_smoker))

    mix = (np.asarray(combos) + _IMG_MIX_WEIGHT * np.asarray(img_latents)) / math.sqrt(
        1.0 + _IMG_MIX_WEIGHT**2
    )
    score = config.signal_strength * mix + rng.standard_normal(n)
    labels = (score > np.median(score)).astype(np.int64)
    labels = _apply_label_noise(rng, labels, config.label_noise)

    records = [
        PatientRecord(f"p{i:04d}", volumes[i], quants[i], quals[i], int(labels[i]))
        for i in range(n)
    ]
    log.info(
        "generated cohort: n=%d kind=%s balance=%.3f",
        n, config.cohort_kind, labels.mean(),
    )
    return records


def _apply_label_noise(rng, labels, noise):
    """Flip each label with probability `noise`, re-drawing the flip mask
    until class balance stays within [0.35, 0.65]."""
    if noise == 0.0:
        return labels
    n = labels.size
    for _ in range(200):
        flipped = np.where(rng.random(n) < noise, 1 - labels, labels)
        if 0.35 <= flipped.mean() <= 0.65:
            return flipped
    raise RuntimeError("could not draw a flip mask preserving class balance")


# -- clinical encoding -------------------------------------------------


@dataclass(frozen=True)
class NormalizationStats:
    means: dict[str, float]
    sds: dict[str, float]


def compute_normalization_stats(records) -> NormalizationStats:
    """Per-field mean and sample SD over a training subset.

    A zero SD (constant field) is stored as 1 so z-scores degrade to 0.
    """
    if len(records) < 2:
        raise InsufficientData("normalization stats need at least two records")
    means, sds = {}, {}
    for name in QUANTITATIVE_FIELDS:
        values = np.array([float(getattr(r.quantitative, name)) for r in records])
        means[name] = float(values.mean())
        sd = float(values.std(ddof=1))
        sds[name] = sd if sd > 0.0 else 1.0
    return NormalizationStats(means, sds)


def encode_clinical(
    quant: QuantitativeClinical,
    qual: QualitativeClinical,
    stats: NormalizationStats,
) -> np.ndarray:
    """Flat feature vector of length ENCODED_DIM.

    Quantitative fields are z-scored with the training-fold stats;
    gender/tabacology/chemo flags are one-hot in their declared category
    order; TNM enters as scaled ordinals t/4, n/3, m/1.
    """
    if stats is None:
        raise MissingStats("encode_clinical requires normalization statistics")
    parts = [
        (float(getattr(quant, name)) - stats.means[name]) / stats.sds[name]
        for name in QUANTITATIVE_FIELDS
    ]
    for options, value in (
        (GENDERS, qual.gender),
        (TABACOLOGY, qual.tabacology),
        (YES_NO, qual.induction_chemo),
        (YES_NO, qual.concomitant_chemo),
    ):
        parts.extend(1.0 if value == opt else 0.0 for opt in options)
    t, n, m = qual.tnm
    parts.extend([t / 4.0, n / 3.0, m / 1.0])
    return np.asarray(parts, dtype=np.float64)


def encode_records(records, stats: NormalizationStats) -> np.ndarray:
    return np.stack([encode_clinical(r.quantitative, r.qualitative, stats) for r in records])


# -- volume file format ------------------------------------------------


def save_volume(tensor: np.ndarray, path):
    """Write a tensor as magic THCV, u16 version, u8 ndim, u32 dims,
    then float32 little-endian row-major data."""
    arr = np.ascontiguousarray(tensor, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(VOLUME_MAGIC)
        fh.write(struct.pack("<H", VOLUME_VERSION))
        fh.write(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            fh.write(struct.pack("<I", dim))
        fh.write(arr.tobytes())


def load_volume(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != VOLUME_MAGIC:
        raise BadMagic(f"{path}: not a volume file")
    if len(data) < 7:
        raise OSError(f"{path}: truncated volume header")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VOLUME_VERSION:
        raise VersionMismatch(f"{path}: volume version {version}, expected {VOLUME_VERSION}")
    ndim = data[6]
    header_end = 7 + 4 * ndim
    if len(data) < header_end:
        raise OSError(f"{path}: truncated volume dimensions")
    shape = struct.unpack_from(f"<{ndim}I", data, 7)
    count = int(np.prod(shape)) if ndim else 1
    if len(data) != header_end + 4 * count:
        raise OSError(f"{path}: volume data size mismatch")
    return np.frombuffer(data, dtype="<f4", count=count, offset=header_end).reshape(shape).copy()


# -- cohort manifest ---------------------------------------------------


def write_cohort(records, out_dir) -> Path:
    """Write per-patient volume files plus the cohort CSV; returns the CSV path."""
    out = Path(out_dir)
    vol_dir = out / "volumes"
    vol_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out / "cohort.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for rec in records:
            rel = f"volumes/{rec.id}.thcv"
            save_volume(rec.volume, out / rel)
            q = rec.quantitative
            row = [rec.id, rel, rec.recurrence]
            for name in QUANTITATIVE_FIELDS:
                value = getattr(q, name)
                row.append(value if name == "num_fractions" else repr(float(value)))
            row.extend(
                [
                    rec.qualitative.gender,
                    rec.qualitative.tabacology,
                    rec.qualitative.induction_chemo,
                    rec.qualitative.concomitant_chemo,
                    *rec.qualitative.tnm,
                ]
            )
            writer.writerow(row)
    return csv_path


def load_cohort(path) -> list[PatientRecord]:
    """Read a cohort written by write_cohort; `path` is the CSV or its directory."""
    csv_path = Path(path)
    if csv_path.is_dir():
        csv_path = csv_path / "cohort.csv"
    base = csv_path.parent
    records = []
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != MANIFEST_HEADER:
            raise OSError(f"{csv_path}: unexpected cohort columns {reader.fieldnames}")
        for row in reader:
            quant = QuantitativeClinical(
                **{
                    name: (int(row[name]) if name == "num_fractions" else float(row[name]))
                    for name in QUANTITATIVE_FIELDS
                }
            )
            qual = QualitativeClinical(
                gender=row["gender"],
                tabacology=row["tabacology"],
                induction_chemo=row["induction_chemo"],
                concomitant_chemo=row["concomitant_chemo"],
                tnm=(int(row["tnm_t"]), int(row["tnm_n"]), int(row["tnm_m"])),
            )
            records.append(
                PatientRecord(
                    row["id"],
                    load_volume(base / row["volume_path"]),
                    quant,
                    qual,
                    int(row["recurrence"]),
                )
            )
    return records
