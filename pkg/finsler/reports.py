import csv
import io
import json
import logging
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict

logger = logging.getLogger(__name__)


class IntegrabilityReport(BaseModel):
    model_config = ConfigDict(extra='forbid')

    metric: str
    n_samples: int
    sup_Z: float
    sup_Zscalar: float
    sup_B: Optional[float] = None
    tol: float
    verdicts: Dict[str, bool]

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


class GeodesicResult(BaseModel):
    """Outcome of the Bonnet-Myers test along one geodesic."""
    index: int
    x0: List[float]
    y0: List[float]
    status: str  # ok | hypothesis-violated | no-conjugate | bound-exceeded | chart-exit
    min_ricci_ratio: float
    equivalence_residual: Optional[float] = None
    conjugate_distance: Optional[float] = None
    bound: float


class BonnetReport(BaseModel):
    metric: str
    lam: float
    n_geodesics: int
    length: float
    step: float
    bound: float
    geodesics: List[GeodesicResult]

    @property
    def hypothesis_violated(self) -> bool:
        return any(g.status == 'hypothesis-violated' for g in self.geodesics)

    @property
    def passed(self) -> bool:
        return all(g.status == 'ok' for g in self.geodesics)


class MobiusReport(BaseModel):
    metric: str
    phi: str
    n_samples: int
    mobius_residual: float
    schwarzian_asymmetry: float = 0.0
    c_conformal_residual: float
    concircular_residual: Optional[float] = None
    tol: float
    verdicts: Dict[str, bool]


def to_json(record: Any) -> str:
    """Deterministic JSON for a pydantic model or a plain dict."""
    payload = record.model_dump(mode='json') if isinstance(record, BaseModel) else record
    return json.dumps(payload, indent=2, sort_keys=True)


def rows_to_csv(header: List[str], rows: List[List[float]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])
    return buffer.getvalue()


def record_to_csv(record: Any) -> str:
    """Flatten a report into key,value rows (nested lists become one row per entry)."""
    payload = record.model_dump() if isinstance(record, BaseModel) else dict(record)
    nested = [k for k, v in payload.items() if isinstance(v, list) and v and isinstance(v[0], dict)]
    if nested:
        key = nested[0]
        entries = payload[key]
        header = list(entries[0].keys())
        rows = [[json.dumps(e[h]) if isinstance(e[h], (list, dict)) else e[h] for h in header] for e in entries]
        return rows_to_csv(header, rows)
    rows = [[k, json.dumps(v, sort_keys=True) if isinstance(v, (list, dict)) else v] for k, v in payload.items()]
    return rows_to_csv(['key', 'value'], rows)


def write_text(path: str, text: str) -> None:
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
    logger.info(f"Wrote {path}")
