import numpy as np
import pytest

from cycleval.domain import (
    BytesSource,
    Caption,
    DatasetEntry,
    EmbeddingVector,
    EvalRecord,
    FileSource,
    GapReport,
    ImageRef,
    RunConfig,
    StageCacheHits,
    StageProviders,
    SyntheticSource,
    validate_entry,
)


def _entry(n_refs: int) -> DatasetEntry:
    image = ImageRef(id="img-1", source=FileSource("img1.jpg"))
    refs = tuple(
        Caption(text=f"Reference {i} about a scene.", origin="human", image_id="img-1")
        for i in range(n_refs)
    )
    return DatasetEntry(image=image, references=refs)


class TestValidateEntry:
    def test_five_human_captions_is_clean(self):
        assert validate_entry(_entry(5)) == []

    def test_three_captions_yields_one_warning(self):
        issues = validate_entry(_entry(3))
        assert len(issues) == 1
        assert issues[0].level == "warning"
        assert "reference count 3 != 5" in issues[0].message

    def test_zero_captions_is_an_error(self):
        issues = validate_entry(_entry(0))
        assert len(issues) == 1
        assert issues[0].level == "error"
        assert "no references" in issues[0].message

    def test_wrong_origin_and_wrong_image_are_errors(self):
        image = ImageRef(id="img-1", source=FileSource("img1.jpg"))
        refs = (
            Caption(text="model made this", origin="model", image_id="img-1"),
            Caption(text="wrong image", origin="human", image_id="img-2"),
        )
        issues = validate_entry(DatasetEntry(image=image, references=refs))
        levels = [i.level for i in issues]
        assert levels.count("error") == 2
        assert levels.count("warning") == 1  # count 2 != 5


class TestImageRef:
    def test_empty_id_rejected(self):
        with pytest.raises(ValueError):
            ImageRef(id="", source=FileSource("a.jpg"))

    def test_nonpositive_dimensions_rejected(self):
        with pytest.raises(ValueError):
            ImageRef(id="a", source=FileSource("a.jpg"), width=0, height=10)

    def test_source_variants(self):
        ImageRef(id="a", source=FileSource("a.jpg"))
        ImageRef(id="b", source=BytesSource(b"\x89PNG", "image/png"))
        ImageRef(id="c", source=SyntheticSource(world_seed=1, index=2))
        with pytest.raises(TypeError):
            ImageRef(id="d", source="not-a-source")


class TestCaption:
    def test_whitespace_only_text_rejected(self):
        with pytest.raises(ValueError):
            Caption(text="   ", origin="human", image_id="x")

    def test_unknown_origin_rejected(self):
        with pytest.raises(ValueError):
            Caption(text="fine", origin="oracle", image_id="x")


class TestEmbeddingVector:
    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            EmbeddingVector(3, [1.0, float("nan"), 0.0])

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError):
            EmbeddingVector(2, [1.0, 2.0, 3.0])

    def test_values_are_read_only(self):
        vec = EmbeddingVector.from_values([1.0, 2.0])
        with pytest.raises(ValueError):
            vec.values[0] = 5.0

    def test_does_not_alias_caller_buffer(self):
        buf = np.array([1.0, 2.0])
        vec = EmbeddingVector(2, buf)
        buf[0] = 99.0
        assert vec.values[0] == 1.0


def _record(condition, caption, cosine=0.5):
    return EvalRecord(
        image_id="img-1",
        caption=caption,
        condition=condition,
        cosine=cosine,
        generated_image_id="gen-x",
        sample_index=0,
        cache_hits=StageCacheHits(caption=None, generate=False, embed_original=False, embed_generated=False),
        provider_ids=StageProviders(captioner=None, generator="g", image_embedder="e"),
    )


class TestEvalRecord:
    def test_condition_origin_consistency_enforced(self):
        human_own = Caption(text="a scene", origin="human", image_id="img-1")
        model_cap = Caption(text="a scene", origin="model", image_id="img-1")
        replacement = Caption(text="other scene", origin="replacement", image_id="img-2")

        _record("correct", human_own)
        _record("model", model_cap)
        _record("incorrect", replacement)

        with pytest.raises(ValueError):
            _record("correct", model_cap)
        with pytest.raises(ValueError):
            _record("model", human_own)
        with pytest.raises(ValueError):
            _record("incorrect", human_own)
        # replacement caption pointing at the evaluated image itself
        bad = Caption(text="same image", origin="replacement", image_id="img-1")
        with pytest.raises(ValueError):
            _record("incorrect", bad)

    def test_cosine_range_enforced(self):
        cap = Caption(text="a scene", origin="model", image_id="img-1")
        with pytest.raises(ValueError):
            _record("model", cap, cosine=1.5)


class TestGapReport:
    def test_identities_enforced(self):
        rows = (("a", 0.9, 0.1), ("b", 0.7, 0.3))
        report = GapReport(
            mean_correct=0.8,
            mean_incorrect=0.2,
            gap=0.6000000000000001,  # 0.8 - 0.2 in float64
            std_correct=0.1,
            std_incorrect=0.1,
            n=2,
            per_image=rows,
        )
        assert report.gap == report.mean_correct - report.mean_incorrect

    def test_wrong_gap_rejected(self):
        with pytest.raises(ValueError):
            GapReport(
                mean_correct=0.8,
                mean_incorrect=0.2,
                gap=0.5,
                std_correct=0.1,
                std_incorrect=0.1,
                n=2,
                per_image=(("a", 0.9, 0.1), ("b", 0.7, 0.3)),
            )

    def test_wrong_n_rejected(self):
        with pytest.raises(ValueError):
            GapReport(
                mean_correct=0.9,
                mean_incorrect=0.1,
                gap=0.8,
                std_correct=0.0,
                std_incorrect=0.0,
                n=3,
                per_image=(("a", 0.9, 0.1),),
            )


class TestRunConfig:
    def test_invariants(self):
        with pytest.raises(ValueError):
            RunConfig(seed=1, cache_dir="c", max_parallel=0)
        with pytest.raises(ValueError):
            RunConfig(seed=1, cache_dir="c", samples_per_caption=0)
        with pytest.raises(ValueError):
            RunConfig(seed=1, cache_dir="c", caption_token_limit=0)

    def test_defaults(self):
        config = RunConfig(seed=1, cache_dir="c")
        assert config.caption_token_limit == 100
        assert config.samples_per_caption == 1
        assert config.caption_prompt == "A short image caption:"
