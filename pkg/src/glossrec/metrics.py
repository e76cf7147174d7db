"""Word error rate and two-classifier inconsistency metrics.

Plain WER comes from a minimum-edit alignment of reference and hypothesis.
For comparing two hypotheses of the same reference (the auxiliary and the
primary classifier), the three sentences are co-aligned into an equal-length
triplet (REF*, HYP*_a, HYP*_p); per-column bookkeeping then yields WER* for
each hypothesis plus the two cross rates:

  wdr: fraction of reference tokens the auxiliary got right but the primary
       got wrong (deterioration),
  war: the opposite direction (amelioration).

Because every column contributes to exactly one side of the ledger,
  err_p = err_a + wdr_count - war_count
holds exactly on integer counts for any triplet, and therefore
  WER*_p = WER*_a + WDR - WAR.

Tokens are arbitrary equatable values; decoded gloss ids and file tokens
both work. Gaps are represented as None.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidInputError

MATCH, SUB, DEL, INS, NONE = "match", "sub", "del", "ins", "none"


@dataclass
class EditAlignment:
    """Minimum-cost alignment columns: (ref token or None, hyp token or None, op)."""

    columns: list[tuple[object, object, str]]
    num_match: int
    num_sub: int
    num_del: int
    num_ins: int

    @property
    def cost(self) -> int:
        return self.num_sub + self.num_del + self.num_ins

    def ref_row(self) -> list:
        return [c[0] for c in self.columns]

    def hyp_row(self) -> list:
        return [c[1] for c in self.columns]


def edit_align(ref: list, hyp: list) -> EditAlignment:
    """Align with unit costs; backtrace prefers match > sub > del > ins."""
    n, m = len(ref), len(hyp)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        d[i][0] = i
    for j in range(1, m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        ref_tok = ref[i - 1]
        row, prev = d[i], d[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (0 if ref_tok == hyp[j - 1] else 1)
            row[j] = min(diag, prev[j] + 1, row[j - 1] + 1)

    columns: list[tuple[object, object, str]] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and d[i][j] == d[i - 1][j - 1]:
            columns.append((ref[i - 1], hyp[j - 1], MATCH))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and d[i][j] == d[i - 1][j - 1] + 1:
            columns.append((ref[i - 1], hyp[j - 1], SUB))
            i, j = i - 1, j - 1
        elif i > 0 and d[i][j] == d[i - 1][j] + 1:
            columns.append((ref[i - 1], None, DEL))
            i -= 1
        else:
            columns.append((None, hyp[j - 1], INS))
            j -= 1
    columns.reverse()

    ops = [c[2] for c in columns]
    return EditAlignment(
        columns=columns,
        num_match=ops.count(MATCH),
        num_sub=ops.count(SUB),
        num_del=ops.count(DEL),
        num_ins=ops.count(INS),
    )


@dataclass
class WerResult:
    num_ref: int
    num_sub: int
    num_del: int
    num_ins: int

    @property
    def num_errors(self) -> int:
        return self.num_sub + self.num_del + self.num_ins

    @property
    def rate(self) -> float:
        return _rate(self.num_errors, self.num_ref)


def _rate(errors: int, n: int) -> float:
    if n > 0:
        return errors / n
    return 0.0 if errors == 0 else float("inf")


def wer(ref: list, hyp: list) -> WerResult:
    """(#sub + #del + #ins) / #reference, with the counts attached."""
    al = edit_align(ref, hyp)
    return WerResult(
        num_ref=len(ref),
        num_sub=al.num_sub,
        num_del=al.num_del,
        num_ins=al.num_ins,
    )


@dataclass
class AlignmentTriplet:
    """Equal-length co-aligned rows; gaps are None.

    ops_a / ops_p give each column's relation to ref_star: match, sub, del,
    ins, or none for a shared-gap column (counted as correct).
    """

    ref_star: list
    hyp_a_star: list
    hyp_p_star: list
    ops_a: list[str]
    ops_p: list[str]

    @property
    def num_ref(self) -> int:
        return sum(1 for t in self.ref_star if t is not None)

    def correct_a(self) -> list[bool]:
        return [op in (MATCH, NONE) for op in self.ops_a]

    def correct_p(self) -> list[bool]:
        return [op in (MATCH, NONE) for op in self.ops_p]


def _merge_gapped_references(ref: list, gapped_a: list, gapped_p: list) -> list:
    """Combine two gapped copies of the same reference into one row.

    Token positions correspond one-to-one (both rows de-gap to ref), so gap
    runs between consecutive tokens merge to a shared run of the larger
    length, which keeps the merged reference as short as possible.
    """

    def gap_runs(row):
        runs, current = [], 0
        for tok in row:
            if tok is None:
                current += 1
            else:
                runs.append(current)
                current = 0
        runs.append(current)
        return runs

    runs_a = gap_runs(gapped_a)
    runs_p = gap_runs(gapped_p)
    merged: list = []
    for k, tok in enumerate(ref):
        merged.extend([None] * max(runs_a[k], runs_p[k]))
        merged.append(tok)
    merged.extend([None] * max(runs_a[len(ref)], runs_p[len(ref)]))
    return merged


def _place_against(ref_star: list, hyp: list) -> tuple[list, list[str]]:
    """Lay the hypothesis into the fixed reference columns.

    Monotone assignment of hypothesis tokens to columns, one column each, no
    extra columns: a token on a token column is a match or sub, a token on a
    gap column is an insertion, an empty token column is a deletion, and an
    empty gap column costs nothing. len(hyp) never exceeds the column count
    because the merged reference kept every insertion slot.
    """
    m, k = len(ref_star), len(hyp)
    if k > m:
        raise InvalidInputError("hypothesis longer than merged reference columns")
    inf = float("inf")
    dp = [[inf] * (k + 1) for _ in range(m + 1)]
    dp[0][0] = 0.0
    for i in range(m):
        col = ref_star[i]
        skip_cost = 0 if col is None else 1
        for j in range(k + 1):
            if dp[i][j] == inf:
                continue
            if dp[i][j] + skip_cost < dp[i + 1][j]:
                dp[i + 1][j] = dp[i][j] + skip_cost
            if j < k:
                take_cost = 1 if col is None else (0 if col == hyp[j] else 1)
                if dp[i][j] + take_cost < dp[i + 1][j + 1]:
                    dp[i + 1][j + 1] = dp[i][j] + take_cost

    row: list = []
    ops: list[str] = []
    i, j = m, k
    while i > 0:
        col = ref_star[i - 1]
        skip_cost = 0 if col is None else 1
        took = j > 0 and dp[i][j] == dp[i - 1][j - 1] + (
            1 if col is None else (0 if col == hyp[j - 1] else 1)
        )
        skipped = dp[i][j] == dp[i - 1][j] + skip_cost
        # tie-break: keep matches, then leave gap columns empty, then pay
        if took and col is not None and col == hyp[j - 1]:
            row.append(hyp[j - 1])
            ops.append(MATCH)
            i, j = i - 1, j - 1
        elif skipped and col is None:
            row.append(None)
            ops.append(NONE)
            i -= 1
        elif took:
            row.append(hyp[j - 1])
            ops.append(INS if col is None else SUB)
            i, j = i - 1, j - 1
        else:
            row.append(None)
            ops.append(DEL)
            i -= 1
    row.reverse()
    ops.reverse()
    return row, ops


def align_triplet(ref: list, hyp_a: list, hyp_p: list) -> AlignmentTriplet:
    """Co-align reference and both hypotheses.

    Steps: align (ref, hyp_p) and (ref, hyp_a) separately; merge the two
    gapped references into REF*; then re-lay each hypothesis against REF*.
    """
    ref_p = edit_align(ref, hyp_p).ref_row()
    ref_a = edit_align(ref, hyp_a).ref_row()
    ref_star = _merge_gapped_references(ref, ref_a, ref_p)
    row_a, ops_a = _place_against(ref_star, hyp_a)
    row_p, ops_p = _place_against(ref_star, hyp_p)
    return AlignmentTriplet(
        ref_star=ref_star,
        hyp_a_star=row_a,
        hyp_p_star=row_p,
        ops_a=ops_a,
        ops_p=ops_p,
    )


@dataclass
class TripletScores:
    """Counts and rates for one co-aligned triplet."""

    num_ref: int
    err_a: int
    err_p: int
    wdr_count: int
    war_count: int

    @property
    def wer_star_a(self) -> float:
        return _rate(self.err_a, self.num_ref)

    @property
    def wer_star_p(self) -> float:
        return _rate(self.err_p, self.num_ref)

    @property
    def wdr(self) -> float:
        return _rate(self.wdr_count, self.num_ref)

    @property
    def war(self) -> float:
        return _rate(self.war_count, self.num_ref)


def wdr_war(triplet: AlignmentTriplet) -> TripletScores:
    corr_a = triplet.correct_a()
    corr_p = triplet.correct_p()
    return TripletScores(
        num_ref=triplet.num_ref,
        err_a=sum(not c for c in corr_a),
        err_p=sum(not c for c in corr_p),
        wdr_count=sum(1 for a, p in zip(corr_a, corr_p) if a and not p),
        war_count=sum(1 for a, p in zip(corr_a, corr_p) if not a and p),
    )


@dataclass
class SentenceScore:
    sentence_id: str
    wer_a: WerResult
    wer_p: WerResult
    triplet: TripletScores

    def to_dict(self) -> dict:
        return {
            "id": self.sentence_id,
            "num_ref": self.wer_p.num_ref,
            "wer_p": self.wer_p.rate,
            "wer_a": self.wer_a.rate,
            "ops_p": {
                "sub": self.wer_p.num_sub,
                "del": self.wer_p.num_del,
                "ins": self.wer_p.num_ins,
            },
            "ops_a": {
                "sub": self.wer_a.num_sub,
                "del": self.wer_a.num_del,
                "ins": self.wer_a.num_ins,
            },
            "wer_star_p": self.triplet.wer_star_p,
            "wer_star_a": self.triplet.wer_star_a,
            "wdr": self.triplet.wdr,
            "war": self.triplet.war,
        }


@dataclass
class MetricsReport:
    """Per-sentence rows plus corpus aggregates (total errors / total tokens)."""

    sentences: list[SentenceScore]
    totals: dict = field(init=False)

    def __post_init__(self):
        if not self.sentences:
            raise InvalidInputError("empty corpus")
        n = sum(s.wer_p.num_ref for s in self.sentences)
        err_p = sum(s.wer_p.num_errors for s in self.sentences)
        err_a = sum(s.wer_a.num_errors for s in self.sentences)
        star_p = sum(s.triplet.err_p for s in self.sentences)
        star_a = sum(s.triplet.err_a for s in self.sentences)
        wdr = sum(s.triplet.wdr_count for s in self.sentences)
        war = sum(s.triplet.war_count for s in self.sentences)
        self.totals = {
            "num_sentences": len(self.sentences),
            "num_ref": n,
            "wer_p": _rate(err_p, n),
            "wer_a": _rate(err_a, n),
            "wer_star_p": _rate(star_p, n),
            "wer_star_a": _rate(star_a, n),
            "wdr": _rate(wdr, n),
            "war": _rate(war, n),
            "delta_wer_star": _rate(war, n) - _rate(wdr, n),
        }

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "aggregate": self.totals,
            "sentences": [s.to_dict() for s in self.sentences],
        }


def score_triplet(sentence_id: str, ref: list, hyp_a: list, hyp_p: list) -> SentenceScore:
    return SentenceScore(
        sentence_id=sentence_id,
        wer_a=wer(ref, hyp_a),
        wer_p=wer(ref, hyp_p),
        triplet=wdr_war(align_triplet(ref, hyp_a, hyp_p)),
    )


def corpus_report(items: list[tuple[str, list, list, list]]) -> MetricsReport:
    """items: (sentence_id, ref, hyp_a, hyp_p) per sentence."""
    return MetricsReport(
        [score_triplet(sid, ref, ha, hp) for sid, ref, ha, hp in items]
    )


def render_triplet(triplet: AlignmentTriplet) -> str:
    """Fixed-width text rendering, gaps shown as runs of asterisks."""

    def cell(tok, width):
        return ("*" * width if tok is None else str(tok)).ljust(width)

    widths = [
        max(
            1,
            *(len(str(t)) for t in (r, a, p) if t is not None),
        )
        if any(t is not None for t in (r, a, p))
        else 1
        for r, a, p in zip(triplet.ref_star, triplet.hyp_a_star, triplet.hyp_p_star)
    ]
    rows = [
        ("REF* :", triplet.ref_star),
        ("HYP-A:", triplet.hyp_a_star),
        ("HYP-P:", triplet.hyp_p_star),
    ]
    return "\n".join(
        label + " " + " ".join(cell(t, w) for t, w in zip(row, widths))
        for label, row in rows
    )


def read_sentence_file(path) -> dict[str, list[str]]:
    """One utterance per line: 'UTT-ID tok tok ...' (tokens may be empty)."""
    out: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            utt_id, tokens = parts[0], parts[1:]
            if utt_id in out:
                raise InvalidInputError(f"{path}:{lineno}: duplicate id {utt_id!r}")
            out[utt_id] = tokens
    return out
