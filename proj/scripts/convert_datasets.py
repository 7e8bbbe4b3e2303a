#!/usr/bin/env python3
"""Best-effort converters from upstream dataset layouts to the normalized JSONL schema.

Upstream releases differ in format; check the output with `capeval run --check-images`.
"""

import argparse
import csv
import json
import sys
from collections import defaultdict
from pathlib import Path


def emit(rows, out):
    with open(out, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n")
    print(f"wrote {len(rows)} rows to {out}", file=sys.stderr)


def base(dataset, item_id, image_id, image_dir, image_file, refs):
    row = {
        "schema_version": 1,
        "dataset": dataset,
        "item_id": item_id,
        "image": {"id": image_id, "path": str(Path(image_dir) / image_file)},
    }
    if refs:
        row["references"] = refs
    return row


def flickr_captions(token_file):
    # Flickr8k.token.txt: "<image>#<n>\t<caption>"
    caps = {}
    for line in Path(token_file).read_text(encoding="utf-8").splitlines():
        if "\t" not in line:
            continue
        key, text = line.split("\t", 1)
        caps[key] = text.strip()
    return caps


def refs_by_image(caps):
    refs = defaultdict(list)
    for key in sorted(caps):
        refs[key.split("#")[0]].append(caps[key])
    return refs


def convert_flickr8k(args):
    # ExpertAnnotations.txt: "<image>\t<caption key>\t<s1>\t<s2>\t<s3>"
    caps = flickr_captions(args.captions)
    refs = refs_by_image(caps)
    rows = []
    for line in Path(args.judgments).read_text(encoding="utf-8").splitlines():
        parts = line.split("\t")
        if len(parts) < 5:
            continue
        image, cap_key, scores = parts[0], parts[1], [int(s) for s in parts[2:5]]
        if cap_key not in caps:
            continue
        item_id = f"{image}|{cap_key}"
        # The candidate itself is one of the image's references upstream; leave it out.
        others = [c for k, c in sorted(caps.items()) if k.split("#")[0] == image and k != cap_key]
        row = base("flickr8k_expert", item_id, image, args.image_dir, image, others or refs[image])
        row["candidate"] = {"id": cap_key, "text": caps[cap_key], "origin": "unknown"}
        row["scores"] = scores
        rows.append(row)
    emit(rows, args.out)


def convert_composite(args):
    # CSV with columns: image, caption, score[, origin][, references (" ||| " separated)]
    rows = []
    with open(args.judgments, newline="", encoding="utf-8") as f:
        for i, rec in enumerate(csv.DictReader(f)):
            image = rec["image"]
            refs = [r.strip() for r in rec.get("references", "").split("|||") if r.strip()]
            row = base("composite", f"c{i:06d}", Path(image).stem, args.image_dir, image, refs)
            row["candidate"] = {"id": f"c{i:06d}", "text": rec["caption"], "origin": rec.get("origin") or "unknown"}
            row["scores"] = [int(float(rec["score"]))]
            rows.append(row)
    emit(rows, args.out)


def convert_pascal50s(args):
    # CSV exported from the upstream .mat: image, caption_a, caption_b, category, votes_a, votes_b
    rows = []
    with open(args.judgments, newline="", encoding="utf-8") as f:
        for i, rec in enumerate(csv.DictReader(f)):
            a, b = int(rec["votes_a"]), int(rec["votes_b"])
            if a == b:
                continue  # no majority
            image = rec["image"]
            item = f"p{i:06d}"
            row = base("pascal50s", item, Path(image).stem, args.image_dir, image, [])
            cat = rec["category"].upper()
            origin_a = "human" if cat in ("HC", "HI", "HM") else "machine"
            origin_b = "human" if cat in ("HC", "HI") else "machine"
            row["candidate_a"] = {"id": item + "a", "text": rec["caption_a"], "origin": origin_a}
            row["candidate_b"] = {"id": item + "b", "text": rec["caption_b"], "origin": origin_b}
            row["category"] = cat
            row["preferred"] = "A" if a > b else "B"
            row["votes"] = {"A": a, "B": b}
            rows.append(row)
    emit(rows, args.out)


def convert_thumb(args):
    # THumB JSONL: {"image": ..., "hyp": ..., "model": ..., "P": ..., "R": ..., "Total": ..., "refs": [...]}
    rows = []
    for i, line in enumerate(Path(args.judgments).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        rec = json.loads(line)
        image = rec["image"]
        model = rec.get("model", "")
        item = f"t{i:06d}"
        row = base("thumb", item, Path(image).stem, args.image_dir, image, rec.get("refs", []))
        origin = "human" if model.lower() == "human" else "machine"
        row["candidate"] = {"id": item, "text": rec["hyp"], "origin": origin}
        if model:
            row["candidate"]["system"] = model
        row["precision"], row["recall"], row["total"] = rec["P"], rec["R"], rec["Total"]
        rows.append(row)
    emit(rows, args.out)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    sub = ap.add_subparsers(dest="dataset", required=True)
    for name, fn in [("flickr8k_expert", convert_flickr8k), ("composite", convert_composite),
                     ("pascal50s", convert_pascal50s), ("thumb", convert_thumb)]:
        p = sub.add_parser(name)
        p.add_argument("--judgments", required=True, help="upstream judgment file")
        if name == "flickr8k_expert":
            p.add_argument("--captions", required=True, help="Flickr8k.token.txt")
        p.add_argument("--image-dir", default="images", help="image directory relative to the image root")
        p.add_argument("--out", required=True)
        p.set_defaults(fn=fn)
    args = ap.parse_args()
    args.fn(args)


if __name__ == "__main__":
    main()
