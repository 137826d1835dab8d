import random

from ecpart.gen import random_corpus, random_function
from ecpart.ir.parser import parse_module


def test_corpus_parses_and_is_deterministic():
    corpus = random_corpus(7, 18)
    assert [g.text for g in corpus] == [g.text for g in random_corpus(7, 18)]
    for g in corpus:
        assert parse_module(g.text).function(g.name) is not None
    assert len({g.profile for g in corpus}) == 9


def test_large_cap():
    corpus = random_corpus(1, 30, large=6)
    assert sum(g.domain_size > 4096 for g in corpus) == 6
    assert all(g.domain_size <= 1 << 16 for g in corpus)


def test_max_domain_filters_profiles():
    assert all(g.domain_size <= 512 for g in random_corpus(3, 10, max_domain=512))


def test_profile_choice():
    g = random_function(random.Random(0), "h", "flags")
    assert g.profile == "flags" and "enum mode" in g.text
