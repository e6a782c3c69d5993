import numpy as np
import pytest

from soilfusion.errors import NonPositiveCertifiedError, UnknownElementError
from soilfusion.pxrf import (
    ELEMENTS,
    CorrectionFactorTable,
    apply_correction,
    average_correction_factor,
    correct_records,
    crm_correction_factor,
    recovery_percent,
)

PASSTHROUGH = {"Zr", "Sr", "Sn", "Sb"}


def test_recovery_hand_cases():
    assert recovery_percent(90, 100) == 90.0
    assert recovery_percent(123.4, 123.4) == 100.0
    assert recovery_percent(0, 50) == 0.0


def test_recovery_rejects_nonpositive_certified():
    with pytest.raises(NonPositiveCertifiedError):
        recovery_percent(10, 0)


def test_factor_hand_cases():
    assert crm_correction_factor(100, 100) == 1.0
    assert crm_correction_factor(50, 100) == 2.0
    assert crm_correction_factor(0, 100) == 0.0


def test_factor_recovery_identity():
    rng = np.random.default_rng(41)
    for _ in range(100):
        reported = float(rng.uniform(0.1, 500))
        certified = float(rng.uniform(0.1, 500))
        product = (
            crm_correction_factor(reported, certified)
            * recovery_percent(reported, certified)
            / 100.0
        )
        assert product == pytest.approx(1.0, abs=1e-12)


def test_average_factor_published_examples():
    assert average_correction_factor((1.01, 1.54, 0.91, 1.30)) == pytest.approx(1.19)
    assert average_correction_factor((0.0, 1.17, 0.27, 0.0)) == pytest.approx(0.72)
    assert average_correction_factor((0.0, 0.0, 0.74, 0.0)) == pytest.approx(0.74)
    assert average_correction_factor((0.0, 0.0, 0.0, 0.0)) == 0.0


def test_default_table_covers_19_elements():
    table = CorrectionFactorTable.default()
    assert set(table.entries) == set(ELEMENTS)
    correctable = {el for el in ELEMENTS if table.factor(el).correctable}
    assert len(correctable) == 15
    assert set(ELEMENTS) - correctable == PASSTHROUGH


def test_default_table_nickel_keeps_published_average():
    entry = CorrectionFactorTable.default().factor("Ni")
    computed = np.mean([f for f in entry.per_crm if f > 0])
    assert entry.acf == 0.60
    assert computed == pytest.approx(0.697, abs=0.001)
    assert abs(computed - entry.acf) > 0.05


def test_default_table_averages_match_mean_of_nonzero_except_nickel():
    table = CorrectionFactorTable.default()
    mismatches = []
    for el in ELEMENTS:
        entry = table.factor(el)
        if not entry.correctable:
            continue
        computed = average_correction_factor(entry.per_crm)
        if abs(computed - entry.acf) > 0.01:
            mismatches.append(el)
    assert mismatches == ["Ni"]


def test_apply_correction_hand_cases():
    table = CorrectionFactorTable.default()
    record = {"Mn": 500.0, "Zr": 310.0, "K": None}
    corrected = apply_correction(record, table)
    assert corrected["Mn"] == pytest.approx(490.0)
    assert corrected["Zr"] == 310.0
    assert corrected["K"] is None


def test_apply_correction_identity_table():
    scans = {
        f"crm{i}": {el: (100.0, 100.0) for el in ELEMENTS} for i in range(1, 5)
    }
    table = CorrectionFactorTable.from_crm_scans(scans)
    record = {el: float(i + 1) for i, el in enumerate(ELEMENTS)}
    assert apply_correction(record, table) == record


def test_apply_correction_unknown_element():
    with pytest.raises(UnknownElementError):
        apply_correction({"Xx": 1.0}, CorrectionFactorTable.default())


def test_reciprocal_table_restores_record():
    table = CorrectionFactorTable.default()
    rng = np.random.default_rng(42)
    record = {el: float(rng.uniform(1, 1000)) for el in ELEMENTS}
    once = apply_correction(record, table)

    inverse_scans = {
        "c1": {
            el: (table.factor(el).acf, 1.0)
            for el in ELEMENTS
            if table.factor(el).correctable
        }
    }
    inverse = CorrectionFactorTable.from_crm_scans(inverse_scans)
    back = apply_correction(once, inverse)
    for el in ELEMENTS:
        assert back[el] == pytest.approx(record[el], abs=1e-9)


def test_corrected_records_preserve_missingness_and_sign():
    table = CorrectionFactorTable.default()
    records = {"s1": np.array([np.nan if i % 5 == 0 else float(i + 1) for i in range(19)])}
    out = correct_records(records, table)
    assert np.isnan(out["s1"][0])
    finite = out["s1"][np.isfinite(out["s1"])]
    assert (finite >= 0).all()


def test_from_crm_scans_pads_missing_crms_with_zero():
    scans = {"only": {"K": (50.0, 100.0)}}
    table = CorrectionFactorTable.from_crm_scans(scans)
    entry = table.factor("K")
    assert entry.per_crm == (2.0, 0.0, 0.0, 0.0)
    assert entry.acf == 2.0
    assert not table.factor("Ca").correctable
