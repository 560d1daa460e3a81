"""Exercise the Python bindings end to end on small synthetic datasets."""

import json
import os
import tempfile

import csiqa


def main():
    corpus = csiqa.generate_preset("appendix-a", seed=1, samples=20)
    assert len(corpus) == 10
    near, far = corpus[0], corpus[9]
    print(near)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "near.csid")
        near.write(path)
        back = csiqa.Dataset.read(path)
        assert back.to_bytes() == near.to_bytes()
        assert json.loads(back.metadata["config"])["n_samples"] == 20

    w_self = csiqa.dataset_difference(near, near, feature="pdp", measure="wasserstein")
    w_far = csiqa.dataset_difference(near, far, feature="pdp", measure="wasserstein")
    assert abs(w_self) < 1e-9 and w_far > 0, (w_self, w_far)
    print(f"W2 pdp: self {w_self:.3g}, far pair {w_far:.4f}")

    nnca = csiqa.dataset_difference(near, far, measure="nnca")
    print(f"NNCA far pair: {nnca:.3f}")

    report = csiqa.similarity_report(near, far, measure="mmd")
    assert report["schema_version"] == csiqa.SCHEMA_VERSION
    assert csiqa.replay(report, near, far) == report
    print("similarity aggregate:", round(report["aggregate"], 4))

    div = csiqa.diversity_report(far)
    assert csiqa.replay(json.dumps(div), far) == div
    print("diversity per feature:", {k: round(v, 4) for k, v in div["per_feature"].items()})
    print("compression diversity:", csiqa.dataset_diversity(far, measure="compression"))

    assert abs(csiqa.dist_ecs([1.0, 0.0], [0.5, 0.5]) - 0.5) < 1e-15
    assert abs(csiqa.dist_gmc([0j], [1 + 0j]) - 0.5) < 1e-15
    assert csiqa.dist_euclidean([1 + 1j], [1 + 1j]) == 0.0

    selection = csiqa.augment_select(near, corpus, k=3)
    assert selection["selected"][0] == 0, selection["ranking"]
    print("selected:", selection["selected"])

    sample = csiqa.Dataset([[1 + 0j] * 8, [0.5j] * 8], grid=(1, 2), subcarriers=4)
    feats = sample.features()
    assert len(feats) == 2 and abs(sum(feats[0]["pdp"]) - 1.0) < 1e-12

    try:
        csiqa.dataset_difference(near, far, measure="cosine")
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("unknown measure accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
