import math
from collections import Counter
from random import Random

import pytest

from screenforge.catalog import (
    AssetRootMissing,
    Catalog,
    NoEligibleProduct,
    ProductRecord,
    brand_from_title,
    ingest,
    sample,
    similar,
    similarity,
    tokens,
)


@pytest.fixture
def asset_root(tmp_path):
    (tmp_path / "img").mkdir()
    return tmp_path


def raw(i, title, image="", **kw):
    return {"id": f"p{i:04d}", "title": title, "image": image, **kw}


def touch(root, rel):
    p = root / rel
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(b"\x89PNG")
    return rel


def test_brand_prefix_heuristic():
    assert brand_from_title(
        "365 Everyday Value, Fragrance Free Baby Wipes") == "365 Everyday Value"
    assert brand_from_title("plain lowercase title, something") == ""
    assert brand_from_title("No Comma Title") == ""


def test_ingest_brand_filled_from_title(asset_root):
    cat = ingest([raw(1, "365 Everyday Value, Fragrance Free Wipes")], asset_root)
    assert cat.records[0].brand == "365 Everyday Value"


def test_ingest_keeps_preextracted_brand(asset_root):
    cat = ingest([raw(1, "Acme, Anvil Deluxe", brand="ACME Corp")], asset_root)
    assert cat.records[0].brand == "ACME Corp"


def test_ingest_drops_empty_titles(asset_root):
    cat = ingest([raw(1, ""), raw(2, "Kept Product")], asset_root)
    assert [r.title for r in cat.records] == ["Kept Product"]


def test_ingest_drops_missing_and_placeholder_images(asset_root):
    # oracle: direct filesystem check decides which of the 100 survive
    records = []
    for i in range(100):
        rel = f"img/{i}.png"
        if i % 10 != 0:
            touch(asset_root, rel)
        records.append(raw(i, f"Product {i}", image=rel))
    cat = ingest(records, asset_root)
    assert len(cat) == 90
    ph = touch(asset_root, "img/placeholder.png")
    cat2 = ingest([raw(1, "X Product", image=ph)], asset_root)
    assert len(cat2) == 0


def test_ingest_strips_site_identifier_tokens(asset_root):
    cat = ingest([raw(1, "Widget Pro B07XJ8C8F5 Steel Edition")], asset_root)
    assert "B07XJ8C8F5" not in cat.records[0].title
    assert "Widget Pro" in cat.records[0].title


def test_ingest_missing_asset_root(tmp_path):
    with pytest.raises(AssetRootMissing):
        ingest([], tmp_path / "nope")


def test_ingest_idempotent(asset_root):
    records = [raw(i, f"Tool Kit {i}, Deluxe") for i in range(20)]
    cat = ingest(records, asset_root)
    again = ingest(
        [{"id": r.id, "title": r.title, "description": r.description,
          "brand": r.brand, "image": r.image_ref} for r in cat.records],
        asset_root)
    assert len(again) == len(cat)


def brute_force_ranking(records, query, k):
    """Oracle: cosine over all pairs, no index involved."""
    scored = sorted(
        ((-similarity(query, r), r.id, r) for r in records
         if r.id != query.id and similarity(query, r) > 0),
        key=lambda t: (t[0], t[1]))
    return [r for _, _, r in scored[:k]]


TOY = [
    ProductRecord("a", "red kettle steel", "boils water fast"),
    ProductRecord("b", "red kettle copper", "boils water"),
    ProductRecord("c", "blue mug ceramic", "holds coffee"),
    ProductRecord("d", "steel pan", "fries eggs fast"),
    ProductRecord("e", "water bottle steel", "holds water"),
]


def test_similar_identical_content_ranks_first():
    cat = Catalog(records=list(TOY))
    query = ProductRecord("zz", "red kettle steel", "boils water fast")
    assert similar(cat, query, 3)[0].id == "a"


def test_similar_k_equal_catalog_size_excludes_query():
    cat = Catalog(records=list(TOY))
    out = similar(cat, TOY[0], k=len(TOY))
    assert TOY[0].id not in [r.id for r in out]
    assert len(out) <= len(TOY) - 1


def test_similar_matches_brute_force_oracle():
    cat = Catalog(records=list(TOY))
    for query in TOY:
        for k in (1, 2, 5):
            got = [r.id for r in similar(cat, query, k)]
            want = [r.id for r in brute_force_ranking(TOY, query, k)]
            assert got == want


def test_similarity_symmetric():
    for a in TOY:
        for b in TOY:
            assert similarity(a, b) == pytest.approx(similarity(b, a))


def test_token_index_covers_retained_records():
    cat = Catalog(records=list(TOY))
    covered = set()
    for members in cat.token_index.values():
        covered |= members
    assert covered == set(range(len(TOY)))


def test_sample_single_record():
    cat = Catalog(records=[TOY[0]])
    assert sample(cat, Random(1)) is TOY[0]


def test_sample_reproducible():
    cat = Catalog(records=list(TOY))
    a = [sample(cat, Random(99)).id, ]
    rng = Random(99)
    pair1 = (sample(cat, rng).id, sample(cat, rng).id)
    rng = Random(99)
    pair2 = (sample(cat, rng).id, sample(cat, rng).id)
    assert pair1 == pair2
    assert pair1[0] == a[0]


def test_sample_category_constraint():
    recs = [ProductRecord("a", "x", category="pans"),
            ProductRecord("b", "y", category="mugs")]
    cat = Catalog(records=recs)
    assert sample(cat, Random(0), category="mugs").id == "b"
    with pytest.raises(NoEligibleProduct):
        sample(cat, Random(0), category="hats")


def test_sample_uniformity_3_sigma():
    # binomial oracle: n=10000, p=1/4 -> mean 2500, sigma ~ 43.3
    recs = [ProductRecord(f"r{i}", f"thing {i}") for i in range(4)]
    cat = Catalog(records=recs)
    rng = Random(7)
    counts = Counter(sample(cat, rng).id for _ in range(10000))
    sigma = math.sqrt(10000 * 0.25 * 0.75)
    for rid in counts:
        assert abs(counts[rid] - 2500) <= 3 * sigma


def test_tokens_lowercase_alnum():
    assert tokens("Red-Kettle 2L!") == ["red", "kettle", "2l"]
