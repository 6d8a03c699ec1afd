import pytest

from core.context import TIME_OF_DAY_DIMENSION, build_dimension
from core.errors import EmptyCorpusError, RemixValidationError, RowError, SchemaError
from core.feature_space import FEATURE_NAMES
from ingestion.dataset_filter import filter_dataset
from ingestion.ingestion_engine import ListeningDataIngestionEngine

from tests.conftest import catalog_from_vectors, dataset_from_triples

engine = ListeningDataIngestionEngine()


@pytest.fixture
def catalog_file(tmp_path, raw_catalog_rows, csv_writer):
    header, *rows = raw_catalog_rows
    return csv_writer(tmp_path / "catalog.csv", header, rows)


def test_load_feature_catalog_normalizes_raw_columns(catalog_file):
    catalog = engine.load_feature_catalog(catalog_file)
    assert catalog.song_ids == ("a", "b", "c")
    assert catalog.vector("a")["tempo"] == pytest.approx(0.5)
    assert catalog.vector("a")["loudness"] == pytest.approx(0.5)
    assert catalog.vector("b")["tempo"] == 1.0
    assert catalog.vector("b")["loudness"] == 0.0
    assert catalog.vector("c")["loudness"] == 1.0
    assert catalog.clamp_counts == {}


def test_catalog_duplicates_keep_last_occurrence(tmp_path, raw_catalog_rows, csv_writer):
    header, *rows = raw_catalog_rows
    repeated = list(rows[0])
    repeated[1] = 0.9
    catalog = engine.load_feature_catalog(csv_writer(tmp_path / "dup.csv", header, rows + [repeated]))
    assert len(catalog) == 3
    assert catalog.duplicate_count == 1
    assert catalog.vector("a")["acousticness"] == pytest.approx(0.9)


def test_catalog_missing_column(tmp_path, csv_writer):
    path = csv_writer(tmp_path / "bad.csv", ["song_id", "energy"], [["a", 0.1]])
    with pytest.raises(SchemaError):
        engine.load_feature_catalog(path)


def test_catalog_row_error_carries_line_number(tmp_path, raw_catalog_rows, csv_writer):
    header, *rows = raw_catalog_rows
    broken = list(rows[1])
    broken[2] = "loud"
    path = csv_writer(tmp_path / "broken.csv", header, [rows[0], broken, rows[2]])
    with pytest.raises(RowError) as err:
        engine.load_feature_catalog(path)
    assert err.value.line == 3
    assert "danceability" in str(err.value)

    lenient = engine.load_feature_catalog(path, fail_fast=False)
    assert lenient.rejected_rows == 1
    assert lenient.song_ids == ("a", "c")


def test_row_with_extra_fields_is_a_row_error(tmp_path, raw_catalog_rows, csv_writer):
    header, *rows = raw_catalog_rows
    ragged = list(rows[1]) + ["extra"]
    path = csv_writer(tmp_path / "ragged.csv", header, [rows[0], ragged, rows[2]])
    with pytest.raises(RowError) as err:
        engine.load_feature_catalog(path)
    assert err.value.line == 3
    assert isinstance(err.value, RemixValidationError)

    lenient = engine.load_feature_catalog(path, fail_fast=False)
    assert lenient.rejected_rows == 1
    assert lenient.song_ids == ("a", "c")


def test_events_with_extra_fields_are_skipped_when_lenient(tmp_path, catalog_file):
    path = tmp_path / "events.csv"
    path.write_text(
        "user_id,song_id,timestamp_local_iso8601\n"
        "u1,a,2024-03-01T07:00:00\n"
        "u1,b,2024-03-01T08:00:00,oops\n"
        "u2,c,2024-03-01T21:00:00\n",
        encoding="utf-8",
    )
    catalog = engine.load_feature_catalog(catalog_file)
    with pytest.raises(RowError):
        engine.load_events(path, catalog, TIME_OF_DAY_DIMENSION)
    d = engine.load_events(path, catalog, TIME_OF_DAY_DIMENSION, fail_fast=False)
    assert [(e.user_id, e.song_id) for e in d.events] == [("u1", "a"), ("u2", "c")]
    assert d.provenance["rejected_rows"] == 1
    assert d.provenance["input_rows"] == 3


def test_non_utf8_file_is_a_schema_error(tmp_path):
    path = tmp_path / "latin1.csv"
    path.write_bytes(("song_id," + ",".join(FEATURE_NAMES) + "\n").encode() + b"caf\xe9" + b",0.5" * 9 + b"\n")
    with pytest.raises(SchemaError):
        engine.load_feature_catalog(path)


def test_load_events_assigns_time_of_day_and_drops_unknown_songs(tmp_path, catalog_file, csv_writer):
    catalog = engine.load_feature_catalog(catalog_file)
    path = csv_writer(
        tmp_path / "events.csv",
        ["user_id", "song_id", "timestamp_local_iso8601"],
        [
            ["u1", "a", "2024-03-01T07:15:00"],
            ["u1", "b", "2024-03-01T23:59:00"],
            ["u2", "zzz", "2024-03-01T10:00:00"],
            ["u2", "c", "2024-03-02T00:30:00+05:00"],
        ],
    )
    d = engine.load_events(path, catalog, TIME_OF_DAY_DIMENSION)
    assert [e.condition.name for e in d.events] == ["morning", "evening", "night"]
    assert d.provenance["dropped_unknown_songs"] == 1
    assert d.provenance["input_rows"] == 4


def test_load_events_reads_non_hour_dimension_from_named_column(tmp_path, catalog_file, csv_writer):
    catalog = engine.load_feature_catalog(catalog_file)
    mood = build_dimension("mood", ["happy", "sad"])
    path = csv_writer(
        tmp_path / "events.csv",
        ["user_id", "song_id", "timestamp_local_iso8601", "mood"],
        [["u1", "a", "2024-03-01T07:15:00", "sad"], ["u1", "b", "2024-03-01T08:15:00", "happy"]],
    )
    d = engine.load_events(path, catalog, mood)
    assert [e.condition.name for e in d.events] == ["sad", "happy"]


def test_malformed_timestamp_row(tmp_path, catalog_file, csv_writer):
    catalog = engine.load_feature_catalog(catalog_file)
    path = csv_writer(
        tmp_path / "events.csv",
        ["user_id", "song_id", "timestamp_local_iso8601"],
        [["u1", "a", "2024-03-01T07:15:00"], ["u1", "b", "yesterday"]],
    )
    with pytest.raises(RowError) as err:
        engine.load_events(path, catalog, TIME_OF_DAY_DIMENSION)
    assert err.value.line == 3


def test_playlist_corpus_per_condition(tmp_path, catalog_file, csv_writer):
    catalog = engine.load_feature_catalog(catalog_file)
    path = csv_writer(
        tmp_path / "playlists.csv",
        ["condition", "playlist_id", "followers", "song_id"],
        [
            ["night", "pl1", 1200, "a"],
            ["morning", "pl2", 900, "b"],
            ["morning", "pl2", 900, "c"],
            ["morning", "pl3", 20, "b"],
            ["morning", "pl3", 20, "missing"],
        ],
    )
    corpora = engine.load_playlist_corpus(path, catalog, [TIME_OF_DAY_DIMENSION])
    assert [c.name for c in corpora] == ["morning", "night"]
    morning = next(v for c, v in corpora.items() if c.name == "morning")
    assert [s.song_id for s in morning.songs] == ["b", "c"]
    assert morning.unresolved_count == 1
    assert morning.duplicate_songs == 1
    assert morning.playlist_count == 2
    assert not morning.meets_protocol


def test_playlist_corpus_with_only_unknown_songs(tmp_path, catalog_file, csv_writer):
    catalog = engine.load_feature_catalog(catalog_file)
    path = csv_writer(tmp_path / "p.csv", ["condition", "playlist_id", "followers", "song_id"], [["night", "p", 1, "x"]])
    with pytest.raises(EmptyCorpusError):
        engine.load_playlist_corpus(path, catalog, [TIME_OF_DAY_DIMENSION])


def test_playlist_condition_must_be_declared(tmp_path, catalog_file, csv_writer):
    catalog = engine.load_feature_catalog(catalog_file)
    path = csv_writer(tmp_path / "p.csv", ["condition", "playlist_id", "followers", "song_id"], [["dawn", "p", 1, "a"]])
    with pytest.raises(SchemaError):
        engine.load_playlist_corpus(path, catalog, [TIME_OF_DAY_DIMENSION])


# --- الترشيح ---

def _thousand_event_fixture():
    songs = [f"p{i}" for i in range(20)] + [f"r{i}" for i in range(5)]
    catalog = catalog_from_vectors({s: [0.5] * len(FEATURE_NAMES) for s in songs})
    triples = []
    for u in range(45):
        triples += [(f"h{u}", f"p{(u + j) % 20}", "morning") for j in range(21)]
    for u in range(5):
        triples.append((f"h{u}", f"r{u}", "evening"))
    for u in range(5):
        triples += [(f"l{u}", f"p{j}", "night") for j in range(10)]
    return dataset_from_triples(triples, catalog)


def test_filter_removes_exactly_the_precomputed_sets():
    d = _thousand_event_fixture()
    assert len(d) == 1000
    filtered = filter_dataset(d, min_song_plays=5, min_user_events=20)
    assert len(filtered) == 945
    report = filtered.provenance["filter"]
    assert report["removed_songs"] == [f"r{i}" for i in range(5)]
    assert report["removed_users"] == [f"l{i}" for i in range(5)]
    assert filtered.users == frozenset(f"h{u}" for u in range(45))
    assert report["events_before"] == 1000 and report["events_after"] == 945


def test_filter_is_idempotent():
    once = filter_dataset(_thousand_event_fixture(), 5, 20)
    twice = filter_dataset(once, 5, 20)
    assert twice.events == once.events
    assert twice.provenance["filter"]["removed_songs"] == []
    assert twice.provenance["filter"]["removed_users"] == []


def test_filter_fixpoint_cascades(make_catalog, make_dataset):
    catalog = make_catalog({s: [0.1] * 9 for s in ("x", "y", "w")})
    triples = [("u1", "x", "night"), ("u1", "x", "night"), ("u2", "y", "night"), ("u2", "w", "night"), ("u3", "y", "night"), ("u4", "w", "night")]
    d = make_dataset(triples, catalog)
    single = filter_dataset(d, min_song_plays=2, min_user_events=2)
    assert {(e.user_id, e.song_id) for e in single.events} == {("u1", "x"), ("u2", "y"), ("u2", "w")}
    assert single.provenance["filter"]["passes"] == 1
    # حذف u3 و u4 يُسقط y و w تحت الحد في التمريرة الثانية
    fixpoint = filter_dataset(d, min_song_plays=2, min_user_events=2, iterate_to_fixpoint=True)
    assert {(e.user_id, e.song_id) for e in fixpoint.events} == {("u1", "x")}
    assert fixpoint.provenance["filter"]["passes"] == 3
    assert fixpoint.provenance["filter"]["removed_users"] == ["u2", "u3", "u4"]


def test_fixpoint_filter_is_idempotent_where_single_pass_is_not(make_catalog, make_dataset):
    catalog = make_catalog({s: [0.1] * 9 for s in ("x", "y", "w")})
    triples = [("u1", "x", "night"), ("u1", "x", "night"), ("u2", "y", "night"), ("u2", "w", "night"), ("u3", "y", "night"), ("u4", "w", "night")]
    d = make_dataset(triples, catalog)
    single = filter_dataset(d, 2, 2)
    again = filter_dataset(single, 2, 2)
    assert again.events != single.events

    fixpoint = filter_dataset(d, 2, 2, iterate_to_fixpoint=True)
    twice = filter_dataset(fixpoint, 2, 2, iterate_to_fixpoint=True)
    assert twice.events == fixpoint.events
    assert twice.provenance["filter"]["removed_songs"] == []
    assert twice.provenance["filter"]["removed_users"] == []


def test_filter_thresholds_zero_keep_everything():
    d = _thousand_event_fixture()
    assert len(filter_dataset(d, 0, 0)) == 1000


def test_filter_to_empty_is_not_an_error(make_catalog, make_dataset):
    catalog = make_catalog({"x": [0.1] * 9})
    d = make_dataset([("u", "x", "night")], catalog)
    assert len(filter_dataset(d, 10, 10)) == 0
