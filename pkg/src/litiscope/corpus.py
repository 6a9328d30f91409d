"""Patent corpus data model, file I/O, data options, and synthetic data.

A corpus file is line-oriented JSON with a version header line
(``#litiscope-corpus v1``). Dates are ISO-8601 ``YYYY-MM-DD``. The
``sec`` object and ``first_litigation_date`` are optional per record.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

from .errors import CorpusError

CORPUS_HEADER = "#litiscope-corpus v1"

DAYS_PER_YEAR = 365.25


@dataclass(frozen=True)
class SecData:
    """Assignee financials from an annual filing; any field may be missing."""

    revenue: float | None = None
    eps: float | None = None
    share_price: float | None = None
    report_year: int | None = None

    FIELDS = ("revenue", "eps", "share_price", "report_year")

    def is_complete(self) -> bool:
        return all(getattr(self, f) is not None for f in SecData.FIELDS)

    def is_empty(self) -> bool:
        return all(getattr(self, f) is None for f in SecData.FIELDS)


@dataclass(frozen=True)
class PatentRecord:
    id: str
    issue_date: dt.date
    claims_text: str
    n_inventors: int
    n_claims: int
    n_claim_words: int
    n_foreign_refs: int
    backward_refs: tuple[str, ...]
    assignee_id: str
    sec: SecData | None = None
    first_litigation_date: dt.date | None = None

    def validate(self) -> None:
        for field in ("n_inventors", "n_claims", "n_claim_words", "n_foreign_refs"):
            if getattr(self, field) < 0:
                raise CorpusError(f"record {self.id!r}: {field} must be >= 0")
        if (
            self.first_litigation_date is not None
            and self.first_litigation_date < self.issue_date
        ):
            raise CorpusError(
                f"record {self.id!r}: first_litigation_date precedes issue_date"
            )
        if self.id in self.backward_refs:
            raise CorpusError(f"record {self.id!r}: backward_refs contains the record itself")


@dataclass(frozen=True)
class LitigationLabel:
    litigated: bool
    years_to_litigation: float | None = None


@dataclass(frozen=True)
class Corpus:
    records: tuple[PatentRecord, ...]
    keyword_tag: str = ""

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise CorpusError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PatentRecord]:
        return iter(self.records)

    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.records)

    def litigated_ids(self) -> frozenset[str]:
        return frozenset(r.id for r in self.records if r.first_litigation_date is not None)

    def n_litigated(self) -> int:
        return sum(1 for r in self.records if r.first_litigation_date is not None)

    def litigation_rate(self) -> float:
        if not self.records:
            return 0.0
        return self.n_litigated() / len(self.records)

    def subset(self, indices: Sequence[int]) -> "Corpus":
        return Corpus(tuple(self.records[i] for i in indices), self.keyword_tag)


class DataOption(Enum):
    """How SEC financial fields participate in a run."""

    NO_SEC = "nosec"
    SEC_DROP = "secdrop"
    SEC_IMPUTE = "secimpute"

    @classmethod
    def parse(cls, text: str) -> "DataOption":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(o.value for o in cls)
            raise CorpusError(f"unknown data option {text!r} (expected one of: {valid})")


def litigation_label(record: PatentRecord) -> LitigationLabel:
    """Label a record; years counted as day difference / 365.25."""
    if record.first_litigation_date is None:
        return LitigationLabel(False, None)
    days = (record.first_litigation_date - record.issue_date).days
    return LitigationLabel(True, days / DAYS_PER_YEAR)


def _parse_date(value: object, line_no: int, field: str) -> dt.date:
    if not isinstance(value, str):
        raise CorpusError(f"line {line_no}: field {field!r} must be an ISO date string")
    try:
        return dt.date.fromisoformat(value)
    except ValueError:
        raise CorpusError(f"line {line_no}: field {field!r} is not a valid ISO date: {value!r}")


def _require(obj: dict, field: str, line_no: int) -> object:
    if field not in obj:
        raise CorpusError(f"line {line_no}: missing required field {field!r}")
    return obj[field]


def _parse_count(obj: dict, field: str, line_no: int) -> int:
    value = _require(obj, field, line_no)
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise CorpusError(f"line {line_no}: field {field!r} must be a nonnegative integer")
    return value


def _parse_sec(obj: object, line_no: int) -> SecData | None:
    if obj is None:
        return None
    if not isinstance(obj, dict):
        raise CorpusError(f"line {line_no}: field 'sec' must be an object")
    known = set(SecData.FIELDS)
    extra = set(obj) - known
    if extra:
        raise CorpusError(f"line {line_no}: unknown sec field(s): {sorted(extra)}")
    kwargs: dict[str, float | int | None] = {}
    for field in ("revenue", "eps", "share_price"):
        value = obj.get(field)
        if value is not None and not isinstance(value, (int, float)):
            raise CorpusError(f"line {line_no}: sec field {field!r} must be numeric")
        kwargs[field] = None if value is None else float(value)
    year = obj.get("report_year")
    if year is not None and (not isinstance(year, int) or isinstance(year, bool)):
        raise CorpusError(f"line {line_no}: sec field 'report_year' must be an integer")
    kwargs["report_year"] = year
    sec = SecData(**kwargs)
    return None if sec.is_empty() else sec


def _parse_record(obj: dict, line_no: int) -> PatentRecord:
    rec_id = _require(obj, "id", line_no)
    if not isinstance(rec_id, str) or not rec_id:
        raise CorpusError(f"line {line_no}: field 'id' must be a non-empty string")
    claims = _require(obj, "claims_text", line_no)
    if not isinstance(claims, str):
        raise CorpusError(f"line {line_no}: field 'claims_text' must be a string")
    refs_raw = _require(obj, "backward_refs", line_no)
    if not isinstance(refs_raw, list) or any(not isinstance(r, str) for r in refs_raw):
        raise CorpusError(f"line {line_no}: field 'backward_refs' must be a list of strings")
    # Duplicates are dropped at load; a self-reference is likewise dropped.
    seen: set[str] = set()
    refs: list[str] = []
    for ref in refs_raw:
        if ref == rec_id or ref in seen:
            continue
        seen.add(ref)
        refs.append(ref)
    assignee = _require(obj, "assignee_id", line_no)
    if not isinstance(assignee, str):
        raise CorpusError(f"line {line_no}: field 'assignee_id' must be a string")
    lit_date = obj.get("first_litigation_date")
    record = PatentRecord(
        id=rec_id,
        issue_date=_parse_date(_require(obj, "issue_date", line_no), line_no, "issue_date"),
        claims_text=claims,
        n_inventors=_parse_count(obj, "n_inventors", line_no),
        n_claims=_parse_count(obj, "n_claims", line_no),
        n_claim_words=_parse_count(obj, "n_claim_words", line_no),
        n_foreign_refs=_parse_count(obj, "n_foreign_refs", line_no),
        backward_refs=tuple(refs),
        assignee_id=assignee,
        sec=_parse_sec(obj.get("sec"), line_no),
        first_litigation_date=(
            None if lit_date is None else _parse_date(lit_date, line_no, "first_litigation_date")
        ),
    )
    known = {
        "id", "issue_date", "claims_text", "n_inventors", "n_claims", "n_claim_words",
        "n_foreign_refs", "backward_refs", "assignee_id", "sec", "first_litigation_date",
    }
    extra = set(obj) - known
    if extra:
        raise CorpusError(f"line {line_no}: unknown field(s): {sorted(extra)}")
    try:
        record.validate()
    except CorpusError as exc:
        raise CorpusError(f"line {line_no}: {exc}")
    return record


def load_corpus(path: str, tag: str = "") -> Corpus:
    """Read a corpus file, validating every record. Errors name the line."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path!r}: {exc}")
    if not lines or lines[0].strip() != CORPUS_HEADER:
        raise CorpusError(f"{path}: first line must be the header {CORPUS_HEADER!r}")
    records: list[PatentRecord] = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {line_no}: invalid JSON ({exc.msg})")
        if not isinstance(obj, dict):
            raise CorpusError(f"line {line_no}: record must be a JSON object")
        record = _parse_record(obj, line_no)
        if record.id in seen:
            raise CorpusError(f"line {line_no}: duplicate record id {record.id!r}")
        seen.add(record.id)
        records.append(record)
    return Corpus(tuple(records), keyword_tag=tag)


def record_to_json(record: PatentRecord) -> str:
    """Serialize one record with a fixed key order (byte-stable output)."""
    obj: dict[str, object] = {
        "id": record.id,
        "issue_date": record.issue_date.isoformat(),
        "claims_text": record.claims_text,
        "n_inventors": record.n_inventors,
        "n_claims": record.n_claims,
        "n_claim_words": record.n_claim_words,
        "n_foreign_refs": record.n_foreign_refs,
        "backward_refs": list(record.backward_refs),
        "assignee_id": record.assignee_id,
    }
    if record.sec is not None:
        sec = {f: getattr(record.sec, f) for f in SecData.FIELDS if getattr(record.sec, f) is not None}
        obj["sec"] = sec
    if record.first_litigation_date is not None:
        obj["first_litigation_date"] = record.first_litigation_date.isoformat()
    return json.dumps(obj, separators=(", ", ": "))


def save_corpus(corpus: Corpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CORPUS_HEADER + "\n")
        for record in corpus.records:
            fh.write(record_to_json(record) + "\n")


def apply_data_option(corpus: Corpus, option: DataOption) -> Corpus:
    """Produce the corpus variant for one of the three SEC data options."""
    if option is DataOption.NO_SEC:
        records = tuple(
            replace(r, sec=None) if r.sec is not None else r for r in corpus.records
        )
        return Corpus(records, corpus.keyword_tag)
    if option is DataOption.SEC_DROP:
        records = tuple(r for r in corpus.records if r.sec is not None and r.sec.is_complete())
        return Corpus(records, corpus.keyword_tag)
    # SEC_IMPUTE: fill each missing field with the per-corpus median of
    # the values present for that field.
    medians: dict[str, float | int] = {}
    for field in SecData.FIELDS:
        values = [
            getattr(r.sec, field) for r in corpus.records
            if r.sec is not None and getattr(r.sec, field) is not None
        ]
        if not values:
            raise CorpusError(
                f"SecImpute: no record carries sec field {field!r}; no median definable"
            )
        med = float(np.median(np.asarray(values, dtype=float)))
        medians[field] = int(round(med)) if field == "report_year" else med
    records = []
    for r in corpus.records:
        sec = r.sec or SecData()
        filled = {
            f: getattr(sec, f) if getattr(sec, f) is not None else medians[f]
            for f in SecData.FIELDS
        }
        records.append(replace(r, sec=SecData(**filled)))
    return Corpus(tuple(records), corpus.keyword_tag)


@dataclass(frozen=True)
class SynthConfig:
    """Configuration for the synthetic corpus generator.

    ``signal_strength`` scales how strongly litigated records differ from
    the rest (reference counts toward litigated patents, claim vocabulary,
    claim/foreign-reference counts, assignee financials). 0 removes the
    signal entirely; 1 gives a clearly learnable separation.
    """

    n: int
    litigation_rate: float
    signal_strength: float = 1.0
    seed: int = 0
    sec_fraction: float = 0.6
    tag: str = "synthetic"


_COMMON_TOKENS = (
    "device", "system", "method", "claim", "network", "data", "signal", "unit",
    "module", "server", "interface", "wherein", "comprising", "step", "plurality",
    "apparatus", "control", "processor", "memory", "circuit", "user", "information",
    "communication", "channel", "node", "receiver", "transmitter", "protocol",
    "message", "packet", "frequency", "antenna", "storage", "display", "sensor",
    "configured", "coupled", "response", "request", "associated",
)

_HOT_TOKENS = (
    "video", "remote", "wireless", "telephone", "audio",
    "monitoring", "streaming", "broadcast",
)

_YEAR_BUCKETS = ((0.0, 1.0), (1.0, 4.0), (4.0, 7.0), (7.0, 14.0))


def generate_synthetic(cfg: SynthConfig) -> Corpus:
    """Generate a deterministic, desk-scale corpus with a tunable signal.

    Exactly ``round(n * litigation_rate)`` records are litigated; their
    time-to-litigation values cycle through the four year buckets so every
    bucket is populated once there are at least four litigated records.
    """
    if not 0.0 < cfg.litigation_rate < 1.0:
        raise CorpusError("litigation_rate must be strictly between 0 and 1")
    if cfg.n < 10:
        raise CorpusError("synthetic corpus needs n >= 10")
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n
    strength = float(cfg.signal_strength)
    n_lit = int(round(n * cfg.litigation_rate))
    lit_indices = np.sort(rng.choice(n, size=n_lit, replace=False))
    is_lit = np.zeros(n, dtype=bool)
    is_lit[lit_indices] = True

    ids = [f"P{i:06d}" for i in range(n)]
    lit_ids = [ids[i] for i in lit_indices]
    n_external = max(40, n // 12)
    external_ids = [f"X{i:05d}" for i in range(n_external)]

    n_assignees = max(3, n // 50)
    assignee_has_sec = rng.random(n_assignees) < cfg.sec_fraction
    assignee_revenue = np.exp(rng.normal(18.5, 1.0, size=n_assignees))
    assignee_eps = rng.normal(2.0, 1.0, size=n_assignees)
    assignee_price = np.exp(rng.normal(3.5, 0.6, size=n_assignees))

    base_day = dt.date(1996, 1, 1)
    issue_offsets = rng.integers(0, 8 * 365, size=n)

    records: list[PatentRecord] = []
    lit_counter = 0
    for i in range(n):
        lit = bool(is_lit[i])
        issue_date = base_day + dt.timedelta(days=int(issue_offsets[i]))

        # Claim text: litigated records lean on the "hot" vocabulary.
        length = int(rng.integers(30, 70))
        hot_p = 0.02 + (0.12 * strength if lit else 0.0)
        hot_mask = rng.random(length) < hot_p
        common_idx = rng.integers(0, len(_COMMON_TOKENS), size=length)
        hot_idx = rng.integers(0, len(_HOT_TOKENS), size=length)
        tokens = [
            _HOT_TOKENS[hot_idx[t]] if hot_mask[t] else _COMMON_TOKENS[common_idx[t]]
            for t in range(length)
        ]
        claims_text = " ".join(tokens)

        # Backward references: a background sample from the external pool
        # and earlier corpus ids, plus (for litigated records) extra
        # references to other litigated patents.
        n_bg = int(rng.poisson(4.0)) + 1
        refs: list[str] = []
        for _ in range(n_bg):
            if rng.random() < 0.55 or i == 0:
                refs.append(external_ids[int(rng.integers(0, n_external))])
            else:
                refs.append(ids[int(rng.integers(0, i))])
        n_to_lit = int(rng.poisson(0.15 + 3.0 * strength)) if lit else int(rng.poisson(0.1))
        for _ in range(n_to_lit if n_lit else 0):
            refs.append(lit_ids[int(rng.integers(0, n_lit))])
        seen: set[str] = set()
        refs_clean = []
        for ref in refs:
            if ref == ids[i] or ref in seen:
                continue
            seen.add(ref)
            refs_clean.append(ref)

        a_idx = int(rng.integers(0, n_assignees))
        sec = None
        if assignee_has_sec[a_idx]:
            boost = 1.0 + (1.5 * strength if lit else 0.0)
            sec = SecData(
                revenue=float(assignee_revenue[a_idx] * boost * rng.lognormal(0.0, 0.15)),
                eps=float(assignee_eps[a_idx] + (0.8 * strength if lit else 0.0) + rng.normal(0.0, 0.2)),
                share_price=float(assignee_price[a_idx] * rng.lognormal(0.0, 0.1)),
                report_year=int(issue_date.year - int(rng.integers(0, 2))),
            )

        first_litigation_date = None
        if lit:
            lo, hi = _YEAR_BUCKETS[lit_counter % 4]
            years = float(rng.uniform(lo + 0.05, hi - 0.05))
            first_litigation_date = issue_date + dt.timedelta(days=int(round(years * DAYS_PER_YEAR)))
            lit_counter += 1

        n_claims = int(5 + rng.poisson(9.0 + (4.0 * strength if lit else 0.0)))
        records.append(
            PatentRecord(
                id=ids[i],
                issue_date=issue_date,
                claims_text=claims_text,
                n_inventors=int(1 + rng.poisson(2.0)),
                n_claims=n_claims,
                n_claim_words=len(tokens),
                n_foreign_refs=int(rng.poisson(1.0 + (1.2 * strength if lit else 0.0))),
                backward_refs=tuple(refs_clean),
                assignee_id=f"A{a_idx:04d}",
                sec=sec,
                first_litigation_date=first_litigation_date,
            )
        )
    return Corpus(tuple(records), keyword_tag=cfg.tag)
