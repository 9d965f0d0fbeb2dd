import pytest

from taskcascade.dataset import load_raw
from taskcascade.schedule import ParseError, PrecedenceError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_canonical_files_pass_through(tmp_path):
    t = write(tmp_path, "t.csv", "task_id,start_day,end_day\na,0,5\nb,7,9\n")
    e = write(tmp_path, "e.csv", "source_id,target_id\na,b\n")
    net, report = load_raw(t, e)
    assert [(x.id, x.start, x.end) for x in net.tasks] == [("a", 0, 5), ("b", 7, 9)]
    assert report["duration_convention"] == "exclusive"


def test_dates_semicolons_and_inclusive_ends(tmp_path):
    t = write(tmp_path, "t.csv", "ID;Start;Finish\nA;01/03/2018;01/03/2018\nB;05/03/2018;09/03/2018\n")
    e = write(tmp_path, "e.csv", "From;To\nA;B\n")
    net, report = load_raw(t, e)
    assert report["day_format"] == "%d/%m/%Y"
    assert report["duration_convention"] == "inclusive"
    assert report["origin"] == "2018-03-01"
    assert [(x.start, x.end) for x in net.tasks] == [(0, 1), (4, 9)]


def test_headerless_tab_separated(tmp_path):
    t = write(tmp_path, "t.tsv", "x\t10\t15\ny\t20\t26\n")
    e = write(tmp_path, "e.tsv", "x\ty\n")
    net, _ = load_raw(t, e)
    assert net.n_edges == 1 and net.tasks[0].start == 0 and net.tasks[1].end == 16


def test_explicit_convention(tmp_path):
    t = write(tmp_path, "t.csv", "task_id,start_day,end_day\na,0,5\nb,5,9\n")
    e = write(tmp_path, "e.csv", "source_id,target_id\na,b\n")
    with pytest.raises(PrecedenceError):
        load_raw(t, e, convention="inclusive")
    with pytest.raises(ValueError):
        load_raw(t, e, convention="sometimes")


def test_bad_values_reported(tmp_path):
    t = write(tmp_path, "t.csv", "task_id,start_day,end_day\na,0,5\nb,soon,9\n")
    e = write(tmp_path, "e.csv", "source_id,target_id\n")
    with pytest.raises(ParseError):
        load_raw(t, e)
