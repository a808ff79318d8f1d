import random
import shutil
import warnings
from pathlib import Path

import pytest

import rankstab

FIXTURE = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "e2e"


def test_rank_statistics():
    assert rankstab.kendall_tau([3, 2, 1], [3, 2, 1]) == pytest.approx(1.0)
    assert rankstab.kendall_tau([3, 2, 1], [1, 2, 3]) == pytest.approx(-1.0)
    assert rankstab.inversions([6, 5, 4, 3, 2, 1], [1, 2, 3, 4, 5, 6]) == 15
    assert rankstab.spearman([1, 2, 3, 4], [1, 2, 4, 3]) == pytest.approx(0.8)


def test_permutation_test_on_identical_means():
    means = [3.0, 2.5, 2.0, 1.5, 1.0, 0.5]
    out = rankstab.permutation_test(means, means, mode="exhaustive")
    assert out["n_assignments"] == 64
    assert out["p_value"] == 1.0


def test_analyze_pair():
    rng = random.Random(3)
    scores = {
        f"m{i}": {lang: [3 - 0.4 * i + rng.gauss(0, 0.3) for _ in range(20)] for lang in ("et", "hu")}
        for i in range(5)
    }
    r = rankstab.analyze_pair(scores, "et", "hu", n_boot=300, seed=4)
    assert r["n_models"] == 5
    assert -1.0 <= r["tau_ci"][0] <= r["tau_ci"][1] <= 1.0
    assert r["tau_point"] == pytest.approx(1.0)
    assert rankstab.analyze_pair(scores, "et", "hu", n_boot=300, seed=4) == r


def test_lexical_metrics():
    tokens = rankstab.tokenize("Tere! Tere, klient.", "et")
    assert tokens == ["tere", "tere", "klient"]
    assert rankstab.ttr(tokens) == pytest.approx(2 / 3)
    assert rankstab.mattr(tokens, window=100) == rankstab.ttr(tokens)
    with pytest.raises(rankstab.DataError):
        rankstab.ttr([])


def test_self_bleu_matches_nltk_method4():
    nltk_bleu = pytest.importorskip("nltk.translate.bleu_score")
    smooth = nltk_bleu.SmoothingFunction().method4
    rng = random.Random(11)
    for _ in range(30):
        docs = [
            [f"w{rng.randrange(6)}" for _ in range(rng.randint(1, 15))]
            for _ in range(rng.randint(2, 5))
        ]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            expected = sum(
                nltk_bleu.sentence_bleu(docs[:i] + docs[i + 1:], d, smoothing_function=smooth)
                for i, d in enumerate(docs)
            ) / len(docs)
        assert rankstab.self_bleu(docs) == pytest.approx(expected, abs=1e-9)


def test_agreement():
    assert rankstab.fleiss_kappa([[3, 0], [0, 3], [3, 0]], 3) == pytest.approx(1.0)
    assert rankstab.classify_agreement(0.385) == "fair"
    assert rankstab.classify_agreement(0.2) == "poor"


def test_sampler_is_language_blind():
    et = rankstab.sample_params(50, "et", seed=8)
    fi = rankstab.sample_params(50, "fi", seed=8)
    for a, b in zip(et, fi):
        assert b["language"] == "fi"
        b["language"] = "et"
        assert a == b


def test_power_analysis():
    rows = rankstab.power_analysis(noise_grid=[0.0], n_reps=5, score_mode="clip", dialogues=10)
    assert rows[0]["rate"] == 1.0


def test_cli_replay(tmp_path):
    for name in ("run.ini", "fixture.jsonl", "annotations.csv"):
        shutil.copy(FIXTURE / name, tmp_path / name)
    ws = tmp_path / "ws"
    for step in ("generate", "metrics", "judge", "lra", "stability", "report"):
        code, _, err = rankstab.run_cli("--config", tmp_path / "run.ini", "--mode", "replay", "--workspace", ws, step)
        assert code == 0, err
    assert "## Ranking stability" in rankstab.render_report(str(ws))
    code, _, err = rankstab.run_cli("--workspace", ws, "nonsense")
    assert code == 2
    assert '"error":"usage"' in err
