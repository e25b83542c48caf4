"""Detection, characterization and classification of follow-back accounts and their communities."""

from .community import Partition, detect_communities, modularity, nmi
from .features import FeatureMatrix, assemble, build_family
from .graph import Account, Corpus, FollowGraph, LabelRecord, Tweet, edge_reciprocity, load_corpus, user_reciprocity

__version__ = "0.1.0"

__all__ = [
    "Account", "Corpus", "FeatureMatrix", "FollowGraph", "LabelRecord", "Partition", "Tweet",
    "assemble", "build_family", "detect_communities", "edge_reciprocity", "load_corpus", "modularity",
    "nmi", "user_reciprocity",
]
