import numpy as np
import pytest
from hypothesis import given, strategies as st

from nfcocomo import (
    Comparison,
    Dataset,
    DatasetError,
    DomainError,
    EvaluationReport,
    Family,
    TrainConfig,
    compare_models,
    evaluate,
    load_dataset,
    loocv,
    mmre,
    pred,
    train,
)
from nfcocomo.learning import predict_many
from nfcocomo.evaluation import SchemaError, dataset_to_csv, loocv_predictions, parse_dataset
from nfcocomo.synthetic import perturb_levels, synthetic_projects

TABLE1_LEVELS = (20.0, 30.0, 50.0, 100.0)

# ---------------------------------------------------------------- loading


def tiny_csv(cocomo81_plain, rows):
    ids = cocomo81_plain.driver_ids
    header = ",".join(["name", "size_kdsi", *ids, "actual_effort_sm"])
    return "\n".join([header, *rows]) + "\n"


def nominal_row(ids, name="p1", size="10", effort="40", **over):
    cells = [over.get(d, "N") for d in ids]
    return ",".join([name, size, *cells, effort])


def test_load_maps_linguistic_tokens(tmp_path, cocomo81_plain):
    ids = cocomo81_plain.driver_ids
    path = tmp_path / "d.csv"
    path.write_text(tiny_csv(cocomo81_plain, [nominal_row(ids, ACAP="VH"), nominal_row(ids, "p2", ACAP="4.5")]))
    data = load_dataset(path, "cocomo-81")
    assert len(data) == 2 and data.family is Family.COCOMO_81
    assert data.records[0].ratings["ACAP"] == 5.0
    assert data.records[1].ratings["ACAP"] == 4.5
    assert data.records[0].ratings["RELY"] == 3.0


def test_empty_file_is_an_error(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(DatasetError, match="empty"):
        load_dataset(path, "cocomo-81")


def test_header_only_is_an_error(cocomo81_plain):
    with pytest.raises(DatasetError, match="no project rows"):
        parse_dataset(tiny_csv(cocomo81_plain, []), "cocomo-81")


def test_malformed_rows_have_row_and_column(cocomo81_plain):
    ids = cocomo81_plain.driver_ids
    bad_num = tiny_csv(cocomo81_plain, [nominal_row(ids), nominal_row(ids, "p2", size="ten")])
    with pytest.raises(DatasetError, match=r"row 3, column size_kdsi"):
        parse_dataset(bad_num, "cocomo-81")
    bad_rating = tiny_csv(cocomo81_plain, [nominal_row(ids, TOOL="medium")])
    with pytest.raises(DatasetError, match=r"row 2, column TOOL"):
        parse_dataset(bad_rating, "cocomo-81")
    missing = tiny_csv(cocomo81_plain, [nominal_row(ids, PCAP="")])
    with pytest.raises(DatasetError, match=r"row 2, column PCAP: missing"):
        parse_dataset(missing, "cocomo-81")
    short = tiny_csv(cocomo81_plain, ["p1,10,N"])
    with pytest.raises(DatasetError, match="row 2"):
        parse_dataset(short, "cocomo-81")
    negative = tiny_csv(cocomo81_plain, [nominal_row(ids, effort="-3")])
    with pytest.raises(DatasetError, match="row 2"):
        parse_dataset(negative, "cocomo-81")


def test_schema_errors(cocomo81_plain):
    ids = cocomo81_plain.driver_ids
    text = tiny_csv(cocomo81_plain, [nominal_row(ids)])
    with pytest.raises(SchemaError, match="FOO"):
        parse_dataset(text.replace("RELY", "FOO", 1), "cocomo-81")
    with pytest.raises(SchemaError, match="unknown column"):
        parse_dataset(text, "cocomo-ii")


def test_synthetic_63_row_round_trip(tmp_path, cocomo81_plain):
    records = synthetic_projects(cocomo81_plain, 63, np.random.default_rng(0))
    data = Dataset(tuple(records), Family.COCOMO_81)
    path = tmp_path / "c81.csv"
    path.write_text(dataset_to_csv(data, cocomo81_plain.driver_ids))
    loaded = load_dataset(path, "cocomo-81")
    assert len(loaded) == 63
    assert loaded.records == data.records


# ---------------------------------------------------------------- metrics


def test_pred_examples():
    assert pred([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 20) == (3, 1.0)
    assert pred([1.3], [1.0], 20) == (0, 0.0)
    assert pred([1.3], [1.0], 30) == (1, 1.0)
    assert pred([1.3], [1.0], 30, inclusive=False) == (0, 0.0)
    est = [1.0] * 49 + [2.0] * 20
    k, frac = pred(est, [1.0] * 69, 20)
    assert k == 49 and round(frac, 2) == 0.71


def test_mmre_examples():
    assert mmre([5.0, 7.0], [5.0, 7.0]) == 0.0
    assert mmre([2.0], [1.0]) == 1.0
    assert mmre([1.1, 0.7], [1.0, 1.0]) == pytest.approx(0.2, abs=1e-15)


@pytest.mark.parametrize("fn", [lambda e, a: pred(e, a, 20), mmre])
def test_metric_domain_errors(fn):
    with pytest.raises(DomainError):
        fn([1.0, 2.0], [1.0])
    with pytest.raises(DomainError):
        fn([1.0], [0.0])
    with pytest.raises(DomainError):
        fn([], [])


def test_pred_level_must_be_positive():
    with pytest.raises(DomainError):
        pred([1.0], [1.0], 0)


ratios = st.lists(st.floats(0.05, 5.0), min_size=1, max_size=40)


@given(ratios, st.randoms(use_true_random=False))
def test_metric_properties(rs, rnd):
    actuals = [10.0 + i for i in range(len(rs))]
    est = [a * r for a, r in zip(actuals, rs)]
    fracs = [pred(est, actuals, p)[1] for p in (5, 20, 30, 50, 100, 1000)]
    assert fracs == sorted(fracs)
    assert pred(est, actuals, 1e9)[1] == 1.0
    order = list(range(len(rs)))
    rnd.shuffle(order)
    est2 = [est[i] for i in order]
    act2 = [actuals[i] for i in order]
    assert pred(est2, act2, 25) == pred(est, actuals, 25)
    assert mmre(est2, act2) == pytest.approx(mmre(est, actuals), rel=1e-12)


# ---------------------------------------------------------------- reports


def test_table1_arithmetic():
    a = EvaluationReport("COCOMO81", 69, TABLE1_LEVELS, (49, 56, 65, 69))
    b = EvaluationReport("NF", 69, TABLE1_LEVELS, (62, 64, 67, 69))
    assert a.percents == (71, 81, 94, 100)
    assert b.percents == (89, 92, 97, 100)
    cmp = Comparison(a, b)
    assert cmp.improvement_percents == (18, 11, 3, 0)
    assert cmp.deltas == tuple(y - x for x, y in zip(a.fractions, b.fractions))
    table = cmp.format_table().splitlines()
    assert table[0] == "N = 69"
    assert "Improvement" in table[1]
    assert [line.split()[0] for line in table[3:7]] == ["20%", "30%", "50%", "100%"]
    assert table[3].split()[1:] == ["49", "71%", "62", "89%", "18%"]


def test_report_validation():
    with pytest.raises(DomainError):
        EvaluationReport("x", 3, (20.0,), (4,))
    with pytest.raises(DomainError):
        EvaluationReport("x", 3, (20.0, 30.0), (1,))
    a = EvaluationReport("a", 3, (20.0,), (1,))
    with pytest.raises(DomainError):
        Comparison(a, EvaluationReport("b", 4, (20.0,), (1,)))


def test_report_csv_and_gnuplot():
    r = EvaluationReport.from_predictions("m", [1.0, 1.25, 3.0], [1.0, 1.0, 1.0])
    lines = r.to_csv().splitlines()
    assert lines[0] == "label,pred_level,count,n,fraction,percent"
    assert lines[1] == "m,20%,1,3,0.3333333333333333,33"
    assert lines[-1].startswith("m,MMRE,,3,")
    g = Comparison(r, r).to_gnuplot().splitlines()
    assert g[1] == "20 0.3333333333333333 0.3333333333333333"


def test_compare_model_with_itself(cocomo81_plain):
    rng = np.random.default_rng(3)
    data = synthetic_projects(cocomo81_plain, 20, rng, noise=0.4)
    cmp = compare_models(data, cocomo81_plain, cocomo81_plain)
    assert cmp.deltas == (0.0,) * 4
    assert cmp.improvement_percents == (0,) * 4
    for rep in (cmp.baseline, cmp.candidate):
        assert list(rep.fractions) == sorted(rep.fractions)


# ---------------------------------------------------------------- leave-one-out


def test_loocv_two_projects(cocomo81_plain):
    data = synthetic_projects(cocomo81_plain, 2, np.random.default_rng(4), noise=0.3)
    est, traces = loocv_predictions(data, cocomo81_plain, TrainConfig(max_iterations=50))
    assert len(traces) == 2 and est.shape == (2,)
    with pytest.raises(DomainError):
        loocv(data[:1], cocomo81_plain)


def test_frozen_loocv_equals_plain_evaluation(cocomo2):
    data = synthetic_projects(cocomo2, 8, np.random.default_rng(5), noise=0.3)
    frozen = TrainConfig(freeze_nf=True, freeze_dnfis=True)
    held_out = loocv(data, cocomo2, frozen, label="model")
    assert held_out == evaluate(data, cocomo2, label="model")


def test_batched_folds_match_sequential_training(cocomo81):
    rng = np.random.default_rng(6)
    data = synthetic_projects(cocomo81, 6, rng, noise=0.3)
    cfg = TrainConfig(max_iterations=60, learning_rate=0.01)
    est, traces = loocv_predictions(data, cocomo81, cfg)
    for n in range(len(data)):
        rest = data[:n] + data[n + 1 :]
        fitted, trace = train(cocomo81, rest, cfg)
        assert est[n] == predict_many(fitted, [data[n]])[0]
        assert traces[n].to_csv() == trace.to_csv()


def test_loocv_beats_misspecified_baseline(cocomo2):
    rng = np.random.default_rng(7)
    data = synthetic_projects(cocomo2, 20, rng)
    start = perturb_levels(cocomo2, rng, fraction=0.2)
    baseline = evaluate(data, start)
    held_out = loocv(data, start, TrainConfig(max_iterations=1500))
    assert held_out.mmre < baseline.mmre
