"""Cohort generator: schema contracts, planted-signal oracles, clinical
encoding, normalization statistics, and the volume file format."""

import numpy as np
import pytest

from thcnet.datagen import (
    ENCODED_DIM,
    CohortConfig,
    QualitativeClinical,
    QuantitativeClinical,
    compute_normalization_stats,
    encode_clinical,
    encode_records,
    generate_cohort,
    load_cohort,
    load_volume,
    save_volume,
    write_cohort,
)
from thcnet.errors import (
    BadMagic,
    InsufficientData,
    InvalidConfig,
    MissingStats,
    VersionMismatch,
)

from helpers import logistic_accuracy


def oracle_accuracy(records, train_frac=0.7):
    n_train = int(len(records) * train_frac)
    stats = compute_normalization_stats(records[:n_train])
    x = encode_records(records, stats)
    y = np.array([r.recurrence for r in records])
    return logistic_accuracy(x[:n_train], y[:n_train], x[n_train:], y[n_train:])


class TestGenerateCohort:
    def test_lung_like_contract(self):
        records = generate_cohort(
            CohortConfig(n_patients=146, cohort_kind="lung-like", seed=3)
        )
        assert len(records) == 146
        labels = np.array([r.recurrence for r in records])
        assert 0.35 <= labels.mean() <= 0.65
        assert len({r.id for r in records}) == 146
        for r in records:
            assert r.volume.shape == (32, 32, 1)
            assert r.volume.dtype == np.float32
            assert r.volume.min() >= 0.0 and r.volume.max() <= 1.0
            assert r.recurrence in (0, 1)
            q = r.quantitative
            assert q.num_fractions >= 1
            assert abs(q.avg_dose_per_fraction * q.num_fractions - q.total_dose) <= (
                0.05 * q.total_dose
            )

    def test_determinism_byte_identical(self):
        config = CohortConfig(n_patients=30, seed=17)
        a = generate_cohort(config)
        b = generate_cohort(config)
        for ra, rb in zip(a, b):
            assert ra.id == rb.id
            assert ra.recurrence == rb.recurrence
            assert np.array_equal(ra.volume, rb.volume)
            assert ra.quantitative == rb.quantitative
            assert ra.qualitative == rb.qualitative

    def test_zero_signal_labels_independent(self):
        records = generate_cohort(
            CohortConfig(n_patients=1000, signal_strength=0.0, label_noise=0.0, seed=5)
        )
        acc = oracle_accuracy(records)
        assert 0.4 <= acc <= 0.6

    def test_separable_preset_learnable(self):
        records = generate_cohort(
            CohortConfig(n_patients=1000, signal_strength=30.0, label_noise=0.0, seed=11)
        )
        assert oracle_accuracy(records) >= 0.95

    def test_signal_monotonicity(self):
        accs = []
        for signal in (0.0, 3.0, 30.0):
            records = generate_cohort(
                CohortConfig(n_patients=1000, signal_strength=signal,
                             label_noise=0.0, seed=29)
            )
            accs.append(oracle_accuracy(records))
        assert accs[1] >= accs[0] - 0.02
        assert accs[2] >= accs[1] - 0.02

    def test_label_noise_respects_balance(self):
        records = generate_cohort(
            CohortConfig(n_patients=20, signal_strength=2.0, label_noise=0.5, seed=23)
        )
        labels = np.array([r.recurrence for r in records])
        assert 0.35 <= labels.mean() <= 0.65

    def test_invalid_configs(self):
        with pytest.raises(InvalidConfig):
            generate_cohort(CohortConfig(n_patients=5))
        with pytest.raises(InvalidConfig):
            generate_cohort(CohortConfig(n_patients=20, cohort_kind="brain-like"))
        with pytest.raises(InvalidConfig):
            generate_cohort(CohortConfig(n_patients=20, image_shape=(30, 32, 1)))
        with pytest.raises(InvalidConfig):
            generate_cohort(CohortConfig(n_patients=20, label_noise=0.7))


class TestEncoding:
    @pytest.fixture
    def example(self):
        records = generate_cohort(CohortConfig(n_patients=20, seed=2))
        stats = compute_normalization_stats(records)
        return records, stats

    def test_vector_length(self, example):
        records, stats = example
        vec = encode_clinical(records[0].quantitative, records[0].qualitative, stats)
        assert vec.shape == (ENCODED_DIM,)
        assert ENCODED_DIM == 23

    def test_mean_value_zscores_to_zero(self, example):
        records, stats = example
        q = records[0].quantitative
        q = QuantitativeClinical(
            **{
                **{f: getattr(q, f) for f in (
                    "hemoglobin", "lymphocytes", "leucocytes", "thrombocytes",
                    "albumin", "treatment_duration", "total_dose", "num_fractions",
                    "avg_dose_per_fraction", "weight_start", "weight_end")},
                "hemoglobin": stats.means["hemoglobin"],
            }
        )
        vec = encode_clinical(q, records[0].qualitative, stats)
        assert vec[0] == pytest.approx(0.0, abs=1e-12)

    def test_tabacology_one_hot_order(self, example):
        records, stats = example
        qual = QualitativeClinical(
            gender="F",
            tabacology="former-smoker",
            induction_chemo="no",
            concomitant_chemo="yes",
            tnm=(2, 1, 0),
        )
        vec = encode_clinical(records[0].quantitative, qual, stats)
        # layout: 11 z-scores, gender (M, F), tabacology (smoker,
        # non-smoker, former-smoker), induction (yes, no), concomitant
        # (yes, no), tnm t/4 n/3 m
        assert list(vec[11:13]) == [0.0, 1.0]
        assert list(vec[13:16]) == [0.0, 0.0, 1.0]
        assert list(vec[16:18]) == [0.0, 1.0]
        assert list(vec[18:20]) == [1.0, 0.0]
        assert vec[20] == pytest.approx(2 / 4)
        assert vec[21] == pytest.approx(1 / 3)
        assert vec[22] == 0.0

    def test_missing_stats(self, example):
        records, _ = example
        with pytest.raises(MissingStats):
            encode_clinical(records[0].quantitative, records[0].qualitative, None)

    def test_encoded_values_bounded(self):
        records = generate_cohort(CohortConfig(n_patients=500, seed=31))
        stats = compute_normalization_stats(records)
        x = encode_records(records, stats)
        assert np.all(np.isfinite(x))
        assert np.abs(x).max() <= 20.0


class TestNormalizationStats:
    def test_hand_values(self):
        records = generate_cohort(CohortConfig(n_patients=10, seed=1))[:2]
        object.__setattr__(records[0].quantitative, "hemoglobin", 12.0)
        object.__setattr__(records[1].quantitative, "hemoglobin", 14.0)
        stats = compute_normalization_stats(records)
        assert stats.means["hemoglobin"] == pytest.approx(13.0)
        assert stats.sds["hemoglobin"] == pytest.approx(np.sqrt(2.0))

    def test_constant_field_gets_unit_sd(self):
        records = generate_cohort(CohortConfig(n_patients=10, seed=1))[:3]
        for r in records:
            object.__setattr__(r.quantitative, "albumin", 40.0)
        stats = compute_normalization_stats(records)
        assert stats.sds["albumin"] == 1.0
        vec = encode_clinical(records[0].quantitative, records[0].qualitative, stats)
        assert vec[4] == 0.0

    def test_insufficient_data(self):
        records = generate_cohort(CohortConfig(n_patients=10, seed=1))[:1]
        with pytest.raises(InsufficientData):
            compute_normalization_stats(records)

    def test_no_leakage_from_test_records(self):
        # A sentinel value in a held-out record must not move the stats.
        records = generate_cohort(CohortConfig(n_patients=20, seed=9))
        train, test = records[:15], records[15:]
        before = compute_normalization_stats(train)
        object.__setattr__(test[0].quantitative, "hemoglobin", 9999.0)
        after = compute_normalization_stats(train)
        assert before == after


class TestVolumeFile:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(4)
        t = rng.random((32, 32, 1)).astype(np.float32)
        path = tmp_path / "v.thcv"
        save_volume(t, path)
        back = load_volume(path)
        assert back.dtype == np.float32
        assert np.array_equal(back, t)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.thcv"
        path.write_bytes(b"XXXX" + b"\x00" * 20)
        with pytest.raises(BadMagic):
            load_volume(path)

    def test_truncated_never_partial(self, tmp_path):
        t = np.random.default_rng(4).random((16, 16, 1)).astype(np.float32)
        path = tmp_path / "v.thcv"
        save_volume(t, path)
        data = path.read_bytes()
        for cut in (2, 5, 9, len(data) - 7):
            path.write_bytes(data[:cut])
            with pytest.raises((BadMagic, OSError)):
                load_volume(path)

    def test_version_mismatch(self, tmp_path):
        t = np.zeros((8, 8, 1), dtype=np.float32)
        path = tmp_path / "v.thcv"
        save_volume(t, path)
        data = bytearray(path.read_bytes())
        data[4] = 9
        path.write_bytes(bytes(data))
        with pytest.raises(VersionMismatch):
            load_volume(path)


class TestCohortFiles:
    def test_write_load_round_trip(self, tmp_path):
        records = generate_cohort(CohortConfig(n_patients=12, seed=6))
        csv_path = write_cohort(records, tmp_path)
        assert csv_path.name == "cohort.csv"
        header = csv_path.read_text().splitlines()[0]
        assert header == (
            "id,volume_path,recurrence,hemoglobin,lymphocytes,leucocytes,"
            "thrombocytes,albumin,treatment_duration,total_dose,num_fractions,"
            "avg_dose_per_fraction,weight_start,weight_end,gender,tabacology,"
            "induction_chemo,concomitant_chemo,tnm_t,tnm_n,tnm_m"
        )
        back = load_cohort(tmp_path)
        assert len(back) == 12
        for a, b in zip(records, back):
            assert a.id == b.id
            assert a.recurrence == b.recurrence
            assert np.array_equal(a.volume, b.volume)
            assert a.qualitative == b.qualitative
            for f in ("hemoglobin", "total_dose", "weight_end"):
                assert getattr(a.quantitative, f) == getattr(b.quantitative, f)

    def test_load_rejects_wrong_columns(self, tmp_path):
        (tmp_path / "cohort.csv").write_text("id,foo\n1,2\n")
        with pytest.raises(OSError):
            load_cohort(tmp_path)
