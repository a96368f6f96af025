"""Symptomatic-tweet pipeline: filter, embed, classify, place and count."""
from .corpus import make_corpus
from .counts import (
    PERIODS_PER_DAY,
    TweetClassifier,
    aggregate_daily,
    aggregate_stream,
    correct_for_downtime,
    count_downtime_periods,
    round_half_up,
    symptomatic_count,
    tweet_counts_payload,
    write_tweet_counts_json,
)
from .geo import RegionPolygon, geolocate, load_gazetteer, load_geojson, point_in_ring
from .skipgram import SkipGramModel, train_skipgram, vectorize
from .svm import (
    CLASSES,
    SYMPTOMATIC,
    SvmModel,
    balance_classes,
    classification_metrics,
    classify,
    classify_many,
    evaluate_classifier,
    train_svm,
)
from .text import LANGUAGES, Lexicon, Tweet, drop_retweets, keyword_filter, read_tweets, tokenize


def train_pipeline(texts, labels, d: int = 50, window: int = 5, negatives: int = 5,
                   epochs: int = 5, seed: int = 0, balance_to: int | None = None
                   ) -> TweetClassifier:
    """Embed ``texts``, optionally balance the classes, and fit the SVM."""
    tokens = [tokenize(t) for t in texts]
    emb = train_skipgram(tokens, d=d, window=window, negatives=negatives, epochs=epochs,
                         seed=seed)
    if balance_to is not None:
        tokens, labels = balance_classes(tokens, labels, balance_to, seed=seed)
    vecs = [vectorize(t, emb) for t in tokens]
    return TweetClassifier(emb, train_svm(vecs, labels, seed=seed))


__all__ = [
    "CLASSES", "LANGUAGES", "PERIODS_PER_DAY", "SYMPTOMATIC", "Lexicon", "RegionPolygon",
    "SkipGramModel", "SvmModel", "Tweet", "TweetClassifier", "aggregate_daily",
    "aggregate_stream", "balance_classes", "classification_metrics", "classify",
    "classify_many", "correct_for_downtime", "count_downtime_periods", "drop_retweets",
    "evaluate_classifier", "geolocate", "keyword_filter", "load_gazetteer", "load_geojson",
    "make_corpus", "point_in_ring", "read_tweets", "round_half_up", "symptomatic_count",
    "tokenize", "train_pipeline", "train_skipgram", "train_svm", "tweet_counts_payload",
    "vectorize", "write_tweet_counts_json",
]
