"""Newline-delimited JSON auction log: one auction per line.

Record layout (schema_version 1)::

    {"schema_version": 1, "auction_id": 7, "k": 5, "m": 10,
     "user_features": [...],
     "ads": [{"ad_id": 0, "bid": 0.42, "coarse_ctr": 0.013,
              "partial_features": [...],
              "ctr_support": [[0.004, 0.1667], [0.011, 0.6667], ...],
              "refined_ctr": 0.011}, ...]}

``ctr_support`` and ``refined_ctr`` are optional; when absent they are
omitted from the line rather than zero-filled.
"""

from __future__ import annotations

import json
import logging
import math
from typing import Iterable, List

import numpy as np

from ..auction import AdRecord, AuctionInstance
from ..env import CtrDistribution

SCHEMA_VERSION = 1

log = logging.getLogger(__name__)


class AuctionLogError(ValueError):
    pass


def _reject_constant(name):
    raise ValueError(f"non-finite number {name}")


def instance_to_record(instance: AuctionInstance) -> dict:
    ads = []
    for i, ad in enumerate(instance.ads):
        entry = {
            "ad_id": ad.ad_id,
            "bid": float(ad.bid),
            "coarse_ctr": float(ad.partial_features[0]),
            "partial_features": [float(v) for v in ad.partial_features[1:]],
        }
        if instance.ctr_table:
            dist = instance.ctr_table[ad.ctr_dist_id]
            entry["ctr_support"] = [[float(v), float(p)] for v, p in dist.support]
        if instance.realized_ctrs is not None:
            entry["refined_ctr"] = float(instance.realized_ctrs[i])
        ads.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "auction_id": int(instance.auction_id),
        "k": int(instance.n_slots),
        "m": int(instance.subset_size),
        "user_features": [float(v) for v in instance.user_features],
        "ads": ads,
    }


def dumps_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)


def record_to_instance(record: dict) -> AuctionInstance:
    if record.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {record.get('schema_version')!r}")
    for key in ("k", "m", "ads", "user_features"):
        if key not in record:
            raise ValueError(f"missing field {key!r}")
    raw_ads = record["ads"]
    if not isinstance(raw_ads, list) or not raw_ads:
        raise ValueError("ads must be a non-empty list")
    has_support = ["ctr_support" in a for a in raw_ads]
    has_refined = ["refined_ctr" in a for a in raw_ads]
    if len(set(has_support)) > 1 or len(set(has_refined)) > 1:
        raise ValueError("ctr_support / refined_ctr must be present for all ads or none")
    ads, table, realized = [], [], []
    for pos, a in enumerate(raw_ads):
        for key in ("ad_id", "bid", "coarse_ctr", "partial_features"):
            if key not in a:
                raise ValueError(f"ad at position {pos} lacks {key!r}")
        partial = np.concatenate(([float(a["coarse_ctr"])], np.asarray(a["partial_features"], dtype=float)))
        if not np.all(np.isfinite(partial)):
            raise ValueError(f"ad {a['ad_id']}: non-finite feature")
        if has_support[0]:
            support = np.asarray(a["ctr_support"], dtype=float).reshape(-1, 2)
            table.append(CtrDistribution(support[:, 0], support[:, 1]))
        if has_refined[0]:
            realized.append(float(a["refined_ctr"]))
        ads.append(AdRecord(int(a["ad_id"]), float(a["bid"]), partial, pos if has_support[0] else 0))
    if not has_support[0]:
        # placeholder table: ctr handles must resolve, so point mass at the coarse ctr
        table = [CtrDistribution.point(min(max(ads[0].partial_features[0], 0.0), 1.0))]
    return AuctionInstance(
        ads, record["user_features"], int(record["k"]), int(record["m"]), tuple(table),
        np.array(realized) if has_refined[0] else None, int(record.get("auction_id", 0)),
    )


def save_auction_log(instances: Iterable[AuctionInstance], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            fh.write(dumps_record(instance_to_record(inst)))
            fh.write("\n")


def load_auction_log(path, strict: bool = False) -> List[AuctionInstance]:
    """Parse and validate a log; bad lines are skipped with a logged diagnostic.

    With ``strict=True`` the first bad line raises AuctionLogError instead.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line, parse_constant=_reject_constant)
                out.append(record_to_instance(record))
            except (ValueError, TypeError, KeyError) as exc:
                msg = f"{path}:{lineno}: {exc}"
                if strict:
                    raise AuctionLogError(msg) from exc
                log.warning("skipping malformed auction record %s", msg)
    return out
