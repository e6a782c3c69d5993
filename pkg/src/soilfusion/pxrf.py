"""Correction of raw PXRF elemental readings against certified references.

Per element, each reference-material scan yields a factor
certified/reported (0 when the element was not detected); the average
correction factor is the mean of the nonzero factors and multiplies the
raw readings. Elements with no detection in any reference scan pass
through uncorrected.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import NonPositiveCertifiedError, SchemaError, UnknownElementError

ELEMENTS = (
    "Ca", "K", "Fe", "Mn", "Rb", "Zr", "Zn", "Ti", "Ba", "Cr",
    "Cu", "Pb", "Ni", "Ag", "Sn", "V", "Sr", "Sb", "Ga",
)

N_CRMS = 4

# Factory defaults from the four reference-material scans used to
# validate the instrument: per-CRM factors and the published average.
# For Ni the published average (0.60) differs from the mean of the
# nonzero factors (0.697); the published value is kept as-is.
_DEFAULT_FACTORS = {
    "K":  ((1.01, 1.54, 0.91, 1.30), 1.19),
    "Ca": ((0.79, 1.25, 0.88, 1.34), 1.06),
    "Fe": ((0.96, 1.26, 0.87, 1.19), 1.07),
    "Mn": ((0.92, 1.26, 0.59, 1.15), 0.98),
    "Rb": ((0.0, 1.17, 0.27, 0.0), 0.72),
    "Zn": ((1.38, 1.28, 0.97, 1.16), 1.20),
    "Cu": ((1.41, 1.29, 1.01, 1.15), 1.22),
    "Cr": ((0.87, 1.52, 0.36, 1.25), 1.00),
    "Ti": ((1.03, 1.45, 3.25, 1.28), 1.75),
    "Ni": ((0.0, 0.48, 0.98, 0.63), 0.60),
    "Ag": ((0.0, 0.0, 0.74, 0.0), 0.74),
    "Ba": ((0.0, 0.99, 1.16, 0.83), 0.99),
    "V":  ((0.80, 0.29, 0.47, 0.20), 0.44),
    "Ga": ((0.0, 0.0, 1.51, 1.72), 1.62),
    "Pb": ((1.24, 1.16, 0.68, 0.0), 1.03),
}


def recovery_percent(reported, certified):
    """Recovery of a reference scan: 100 * reported / certified."""
    if certified <= 0:
        raise NonPositiveCertifiedError("certified concentration must be > 0")
    return 100.0 * reported / certified


def crm_correction_factor(reported, certified):
    """certified/reported for one reference scan; 0 when undetected."""
    if certified <= 0:
        raise NonPositiveCertifiedError("certified concentration must be > 0")
    if reported <= 0:
        return 0.0
    return certified / reported


def average_correction_factor(per_crm_factors):
    """Mean of the strictly positive per-CRM factors; 0 when all are 0."""
    factors = [float(f) for f in per_crm_factors]
    if len(factors) != N_CRMS:
        raise ValueError(f"expected {N_CRMS} per-CRM factors, got {len(factors)}")
    if any(f < 0 for f in factors):
        raise ValueError("per-CRM factors must be >= 0")
    positive = [f for f in factors if f > 0]
    if not positive:
        return 0.0
    return sum(positive) / len(positive)


@dataclass(frozen=True)
class ElementCorrection:
    per_crm: tuple
    acf: float
    correctable: bool


class CorrectionFactorTable:
    """Per-element correction factors over the 19 measured elements."""

    def __init__(self, entries):
        unknown = set(entries) - set(ELEMENTS)
        if unknown:
            raise UnknownElementError(f"unknown elements: {sorted(unknown)}")
        self.entries = {}
        for el in ELEMENTS:
            if el in entries:
                self.entries[el] = entries[el]
            else:
                self.entries[el] = ElementCorrection((0.0,) * N_CRMS, 0.0, False)

    @classmethod
    def default(cls):
        """The factory default table; elements without factors pass through."""
        entries = {
            el: ElementCorrection(per_crm, acf, True)
            for el, (per_crm, acf) in _DEFAULT_FACTORS.items()
        }
        return cls(entries)

    @classmethod
    def from_crm_scans(cls, scans):
        """Build a table from reference scans.

        `scans` maps crm_id -> {element: (reported, certified)}. Fewer
        than four CRMs are padded with 0 (not-detected) factors so the
        table keeps its four-column shape.
        """
        crm_ids = sorted(scans)
        if len(crm_ids) > N_CRMS:
            raise ValueError(f"at most {N_CRMS} reference materials supported")
        entries = {}
        for el in ELEMENTS:
            factors = []
            for crm_id in crm_ids:
                if el in scans[crm_id]:
                    reported, certified = scans[crm_id][el]
                    factors.append(crm_correction_factor(reported, certified))
                else:
                    factors.append(0.0)
            factors.extend([0.0] * (N_CRMS - len(factors)))
            acf = average_correction_factor(factors)
            entries[el] = ElementCorrection(tuple(factors), acf, acf > 0)
        return cls(entries)

    def factor(self, element):
        if element not in self.entries:
            raise UnknownElementError(f"element {element!r} not in table")
        return self.entries[element]


def apply_correction(record, table):
    """Scale a {element: value-or-None} reading by the table's factors.

    Correctable elements are multiplied by their average factor; the
    rest pass through. None (missing) values stay missing.
    """
    corrected = {}
    for el, value in record.items():
        entry = table.factor(el)
        if value is None:
            corrected[el] = None
        elif entry.correctable:
            corrected[el] = value * entry.acf
        else:
            corrected[el] = value
    return corrected


def read_crm_scans(path):
    """Parse crm_scans.csv (crm_id, element, reported_mg_kg, certified_mg_kg)."""
    df = pd.read_csv(path, dtype={"crm_id": str, "element": str})
    required = ["crm_id", "element", "reported_mg_kg", "certified_mg_kg"]
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}")
    scans = {}
    for row in df.itertuples(index=False):
        el = row.element
        if el not in ELEMENTS:
            raise UnknownElementError(f"{path}: unknown element {el!r}")
        scans.setdefault(row.crm_id, {})[el] = (
            float(row.reported_mg_kg),
            float(row.certified_mg_kg),
        )
    return scans


def read_pxrf_csv(path):
    """Parse pxrf.csv into {sample_id: 19-vector with NaN for blanks}."""
    df = pd.read_csv(path, dtype={"sample_id": str})
    if "sample_id" in df.columns:
        missing = [el for el in ELEMENTS if el not in df.columns]
        if missing:
            raise SchemaError(f"{path}: missing element column(s) {missing}")
    else:
        raise SchemaError(f"{path}: missing column(s) ['sample_id']")
    if df["sample_id"].duplicated().any():
        dupes = df.loc[df["sample_id"].duplicated(), "sample_id"].tolist()
        raise SchemaError(f"{path}: duplicate sample_id(s) {dupes}")
    records = {}
    for _, row in df.iterrows():
        records[row["sample_id"]] = np.array(
            [float(row[el]) if pd.notna(row[el]) else np.nan for el in ELEMENTS]
        )
    return records


def write_pxrf_csv(records, path):
    rows = []
    for sid in records:
        row = {"sample_id": sid}
        for el, value in zip(ELEMENTS, records[sid]):
            row[el] = value if np.isfinite(value) else None
        rows.append(row)
    df = pd.DataFrame(rows, columns=["sample_id", *ELEMENTS])
    df.to_csv(path, index=False, float_format="%.9g")


def write_acf_csv(table, path):
    rows = []
    for el in ELEMENTS:
        entry = table.factor(el)
        rows.append(
            {
                "element": el,
                **{f"crm{i + 1}": entry.per_crm[i] for i in range(N_CRMS)},
                "acf": entry.acf,
                "correctable": entry.correctable,
            }
        )
    pd.DataFrame(rows).to_csv(path, index=False, float_format="%.9g")


def correct_records(records, table):
    """Apply the table to a {sample_id: 19-vector} mapping (NaN = missing)."""
    acfs = np.array(
        [table.factor(el).acf if table.factor(el).correctable else 1.0 for el in ELEMENTS]
    )
    return {sid: vec * acfs for sid, vec in records.items()}
