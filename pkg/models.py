from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# Group definition files

class AlphabetSection(BaseModel):
    generators: Optional[List[str]] = Field(None, description="Generator names; inverses by case swap")
    pairs: Optional[List[Tuple[str, str]]] = Field(None, description="Explicit inverse pairs")
    marker: str = Field("#", description="Printable name of the marker")

    @model_validator(mode="after")
    def one_spelling(self):
        if (self.generators is None) == (self.pairs is None):
            raise ValueError("alphabet needs exactly one of 'generators' or 'pairs'")
        return self


class BackendSection(BaseModel):
    kind: Literal["finite_table", "free", "free_product", "direct_product"]
    rank: Optional[int] = Field(None, ge=0, description="Rank of a free backend")


class TableSection(BaseModel):
    rows: List[List[int]] = Field(..., description="Multiplication table over element ids")
    generators: Dict[str, int] = Field(..., description="Letter name -> element id")


class GroupFile(BaseModel):
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "name": "z3",
                "alphabet": {"generators": ["a"]},
                "backend": {"kind": "finite_table"},
                "table": {"rows": [[0, 1, 2], [1, 2, 0], [2, 0, 1]], "generators": {"a": 1, "A": 2}},
            }
        }
    )

    name: str = "group"
    alphabet: Optional[AlphabetSection] = None
    backend: BackendSection
    table: Optional[TableSection] = None
    factors: List["GroupFile"] = Field(default_factory=list)

    @model_validator(mode="after")
    def sections_match_kind(self):
        kind = self.backend.kind
        if kind in ("finite_table", "free") and self.alphabet is None:
            raise ValueError(f"{kind} backend needs an [alphabet] section")
        if kind == "finite_table" and self.table is None:
            raise ValueError("finite_table backend needs a [table] section")
        if kind == "free" and self.backend.rank is None:
            raise ValueError("free backend needs 'rank'")
        if kind in ("free_product", "direct_product") and not self.factors:
            raise ValueError(f"{kind} backend needs at least one [[factors]] entry")
        if kind == "free_product" and any(f.backend.kind != "finite_table" for f in self.factors):
            raise ValueError("free_product factors must be finite_table groups")
        return self


GroupFile.model_rebuild()


# Experiment configuration

ExperimentName = Literal[
    "table-enum",
    "table-fsa-check",
    "flabby",
    "triangulate",
    "synthesize-grammar",
    "theorem1-check",
    "theorem2-check",
    "columns",
    "comparator",
    "theorem3-pipeline",
    "sigma-star-roundtrip",
    "thinness",
    "bk-check",
]


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "experiment": "theorem1-check",
                "group": "f2",
                "combing": "geodesic",
                "maxlen": 10,
            }
        }
    )

    experiment: ExperimentName
    group: str = Field("f2", description="Builtin group name or group definition file")
    combing: str = Field("geodesic", description="geodesic | shortlex | sigma-star | acceptor file")
    maxlen: int = Field(8, ge=1)
    delta: int = Field(1, ge=1)
    policy: Literal["greedy", "paper"] = "greedy"
    seed: int = 0
    out: str = "reports"
    expect_nonhyperbolic: bool = False
    budget_states: Optional[int] = Field(None, gt=0)
    budget_elements: Optional[int] = Field(None, gt=0)
    letter: Optional[str] = Field(None, description="Restrict column/comparator runs to one letter ('-' for ε)")
    element: Optional[str] = Field(None, description="Word naming the column element g")
    cycles: int = Field(200, ge=1, description="Random cycles for the triangulation experiment")
    refine: bool = Field(False, description="Use refined subcombings in the automatic-structure pipeline")

    @field_validator("group", "combing")
    @classmethod
    def referenced_file_exists(cls, value: str) -> str:
        path = Path(value)
        if path.suffix and not path.exists():
            raise ValueError(f"file {value} does not exist")
        return value


# Reports

class CombingInfo(BaseModel):
    name: str
    geodesic_complete: bool
    unique_representatives: bool
    states: int = 0


class TriangleMetrics(BaseModel):
    width: int = Field(..., ge=0)
    norm: int = Field(..., ge=0)


class TriangleRecord(BaseModel):
    word: str
    length: int = Field(0, ge=0, description="Total length of the table word")
    norm: int
    width: int
    certified_bound: Optional[int] = None


class FlabbyReport(BaseModel):
    slope: float
    maxlen: int
    count: int
    max_width: int
    c_emp: float
    triangles: List[TriangleRecord] = Field(default_factory=list)


class Diagonal(BaseModel):
    i: int
    j: int
    length: int


class PolygonTriangulation(BaseModel):
    n: int
    diagonals: List[Diagonal] = Field(default_factory=list)

    @property
    def max_length(self) -> int:
        return max((d.length for d in self.diagonals), default=0)


class ProximityReport(BaseModel):
    n: int
    v0_to_w: int
    w_to_v0: int
    d_emp_v0: float = Field(..., description="v0_to_w - n/36")
    d_emp_w: float = Field(..., description="(w_to_v0 - n/18) / 2")


class ThinnessReport(BaseModel):
    maxlen: int
    k: int
    triangles: List[TriangleRecord] = Field(default_factory=list)
    unparsed: List[str] = Field(default_factory=list)
    violations: List[str] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.unparsed and not self.violations


class RoundtripReport(BaseModel):
    group: str
    m_direct_equals_preimage: bool
    w_recovered: bool
    w1_equals_preimage: bool
    states: Dict[str, int] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.m_direct_equals_preimage and self.w_recovered and self.w1_equals_preimage


class PipelineLetterResult(BaseModel):
    letter: str
    k: int
    linear_productions: int
    tau_states: int
    combined_states: int
    checked_words: int
    counterexamples: List[Tuple[str, str]] = Field(default_factory=list)


class PipelineReport(BaseModel):
    maxlen: int
    combing: str
    refined: bool
    r1_surjective: bool
    letters: List[PipelineLetterResult] = Field(default_factory=list)

    @property
    def counterexamples(self) -> List[Tuple[str, str, str]]:
        return sorted((r.letter, u, v) for r in self.letters for u, v in r.counterexamples)

    @property
    def passed(self) -> bool:
        return self.r1_surjective and not self.counterexamples


class ExperimentReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(1, serialization_alias="schema")
    experiment: str
    anchor: str = Field(..., description="Theorem or section the experiment tests")
    direction: str = Field("", description="Which direction of an equivalence was checked")
    group: str
    combing: str
    maxlen: int
    seed: int
    passed: bool
    results: Dict[str, Any] = Field(default_factory=dict)
    counterexamples: List[Any] = Field(default_factory=list)
