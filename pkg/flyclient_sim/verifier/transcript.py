import csv
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional

from ..chain import ConsensusRules
from ..codec import Encoding, encode_item, measure_transcript

KINDS = ("info", "header", "node", "auth_root", "work", "height")
CSV_FIELDS = ["kind", "branch", "key", "bytes_json", "bytes_binary", "bytes_zipped"]


@dataclass(frozen=True)
class TranscriptItem:
    """
    One answer downloaded from a prover.

    The key is the height for headers, auth data roots and total-work
    answers, the node index for nodes, and the queried work value for
    height answers.
    """

    kind: str
    branch: Optional[int]
    key: int
    payload: Any


class Transcript:
    """
    An ordered log of every item a verification session downloaded,
    repeated downloads included.
    """

    def __init__(self):
        self.items: List[TranscriptItem] = []

    def add(self, kind: str, payload: Any, key: int = 0, branch: Optional[int] = None):
        assert kind in KINDS, f"unknown item kind: {kind}"
        self.items.append(TranscriptItem(kind=kind, branch=branch, key=key, payload=payload))

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator[TranscriptItem]:
        return iter(self.items)

    def count(self, kind: str) -> int:
        return sum(1 for x in self.items if x.kind == kind)

    def keys(self, kind: str) -> List[int]:
        return [x.key for x in self.items if x.kind == kind]

    def measure(self, enc: Encoding, rules: ConsensusRules) -> int:
        return measure_transcript(self.items, enc, rules)

    def rows(self, rules: ConsensusRules, format: str = "normal") -> Iterator[Dict[str, Any]]:
        encodings = {
            rep: Encoding(representation=rep, format=format)
            for rep in ["json", "binary", "zipped"]
        }
        for item in self.items:
            branch = "" if item.branch is None else item.branch
            row = dict(kind=item.kind, branch=branch, key=item.key)
            for rep, enc in encodings.items():
                row[f"bytes_{rep}"] = len(encode_item(item.kind, item.payload, enc, rules))
            yield row

    def write_csv(self, path: str, rules: ConsensusRules, format: str = "normal"):
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
            writer.writeheader()
            for row in self.rows(rules, format):
                writer.writerow(row)
