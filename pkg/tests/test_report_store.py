import json

from models import ExperimentReport, TriangleRecord
from services.report_store import ReportStore


def make_report(**fields):
    values = dict(
        experiment="table-enum",
        anchor="multiplication table of a combing",
        group="z2",
        combing="geodesic",
        maxlen=5,
        seed=0,
        passed=True,
        results={"count": 4},
    )
    values.update(fields)
    return ExperimentReport(**values)


def test_report_round_trip(tmp_path):
    store = ReportStore(str(tmp_path / "out"))
    path = store.save_report(make_report())
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    assert raw["schema"] == 1
    assert "schema_version" not in raw
    loaded = store.load_report("table-enum")
    assert loaded == make_report()


def test_missing_report(tmp_path):
    assert ReportStore(str(tmp_path)).load_report("flabby") is None


def test_file_names_are_cleaned(tmp_path):
    store = ReportStore(str(tmp_path))
    assert store.get_file_path("comparator-f2-a/b", ".tsv") == str(tmp_path / "comparator-f2-ab.tsv")


def test_scatter_csv(tmp_path):
    store = ReportStore(str(tmp_path))
    records = [
        TriangleRecord(word="##", length=2, norm=0, width=0),
        TriangleRecord(word="aa#bb#AABB", length=10, norm=4, width=2, certified_bound=5),
    ]
    store.save_scatter("flabby-z_squared", records)
    df = store.load_scatter("flabby-z_squared")
    assert list(df.columns) == ["word", "length", "norm", "width", "certified_bound"]
    assert df["word"].tolist() == ["##", "aa#bb#AABB"]
    assert df["width"].tolist() == [0, 2]


def test_word_and_pair_files(tmp_path):
    store = ReportStore(str(tmp_path))
    store.save_words("table-enum-z2", ["##", "a#a#"])
    assert store.load_lines("table-enum-z2", ".txt") == ["##", "a#a#"]
    store.save_pairs("comparator-z3-a", [("", "a"), ("a", "A")])
    assert store.load_lines("comparator-z3-a", ".tsv") == ["\ta", "a\tA"]


def test_use_switches_directories(tmp_path):
    store = ReportStore()
    store.use(str(tmp_path / "elsewhere"))
    store.save_words("x", ["a"])
    assert (tmp_path / "elsewhere" / "x.txt").exists()
