from msplab.cli.corpus import CorpusSplits, parse_target, split_corpus
from msplab.cli.parser import COMMANDS, build_parser

__all__ = [
    "CorpusSplits",
    "parse_target",
    "split_corpus",
    "COMMANDS",
    "build_parser",
]
