#!/usr/bin/env python3
"""Independent reference for the committed fixture goldens.

Recomputes noun phrases, adapted vocabularies, detections and metrics from the
fixture inputs with straightforward Python. Without --check the goldens are
(re)written; with --check they are compared against the committed files.
"""

import argparse
import json
import struct
import sys
import unicodedata
from pathlib import Path

WHITE_SPACE = set(
    [chr(c) for c in range(0x09, 0x0E)]
    + [" ", "\u0085", " ", " "]
    + [chr(c) for c in range(0x2000, 0x200B)]
    + [" ", " ", " ", " ", "　"]
)
THRESHOLDS = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]
SCORE_TOL = 1e-9
METRIC_TOL = 1e-9


def dumps(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def normalize(s):
    s = unicodedata.normalize("NFC", unicodedata.normalize("NFC", s).lower())
    out, pending = [], False
    for ch in s:
        if ch in WHITE_SPACE:
            pending = bool(out)
            continue
        if pending:
            out.append(" ")
            pending = False
        out.append(ch)
    return "".join(out)


# ---- noun phrases ----

def load_lexicon(path):
    lex = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        token, tag = line.split("\t")
        lex[token] = tag
    return lex


def is_punct(ch):
    return unicodedata.category(ch)[0] in "PS"


def tokenize(caption):
    """(text, break_before) pairs."""
    tokens = []
    pending = False
    for segment in "".join(" " if c in WHITE_SPACE else c for c in caption).split(" "):
        if not segment:
            continue
        lo, hi = 0, len(segment)
        while lo < hi and is_punct(segment[lo]):
            lo += 1
        while hi > lo and is_punct(segment[hi - 1]):
            hi -= 1
        if lo > 0:
            pending = True
        if lo < hi:
            tokens.append((segment[lo:hi], pending and bool(tokens)))
            pending = False
        if hi < len(segment):
            pending = True
    return tokens


def tag(token, lex):
    t = normalize(token)
    if t in lex:
        return lex[t]
    if any(c.isdigit() for c in t) and all(c in "0123456789,." for c in t):
        return "NUM"
    if t.endswith("ing") or t.endswith("ed"):
        return "VERB"
    if t.endswith("ly"):
        return "OTHER"
    if t.endswith(("ous", "ful", "ish", "al")):
        return "ADJ"
    return "NOUN"


def phrases(caption, lex):
    toks = [(text, tag(text, lex), brk) for text, brk in tokenize(caption)]
    # Split into segments at stripped punctuation; grammar applies within each.
    segments, cur = [], []
    for t in toks:
        if t[2] and cur:
            segments.append(cur)
            cur = []
        cur.append(t)
    if cur:
        segments.append(cur)
    out = []
    for seg in segments:
        # Runs of ADJ/NOUN; within a run, every ADJ* NOUN+ match (ADJs after a noun start a new match).
        run = []
        for t in seg + [("", "END", False)]:
            if t[1] in ("ADJ", "NOUN"):
                run.append(t)
                continue
            out.extend(match_run(run))
            run = []
    seen, result = set(), []
    for p in out:
        if p and p not in seen:
            seen.add(p)
            result.append(p)
    return result


def match_run(run):
    found = []
    i = 0
    while i < len(run):
        j = i
        while j < len(run) and run[j][1] == "ADJ":
            j += 1
        k = j
        while k < len(run) and run[k][1] == "NOUN":
            k += 1
        if k == j:
            i = max(j, i + 1)
            continue
        words = [w for w, _, _ in run[i:k]][-4:]
        found.append(normalize(" ".join(words)))
        i = k
    return found


def nouns_lines(captions_path, lex):
    lines = []
    for line in Path(captions_path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        lines.append(dumps({"image_id": rec["image_id"], "phrases": phrases(rec["caption"], lex)}))
    return lines


# ---- embeddings ----

def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def unit_rows(pairs):
    rows = {}
    for key, vec in pairs:
        vec = [f32(v) for v in vec]
        norm = sum(v * v for v in vec) ** 0.5
        rows[key] = [f32(v / norm) for v in vec]
    return rows


def load_emb(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] == b"VEMB":
        _, rows, dim = struct.unpack("<III", raw[4:16])
        keys = json.loads(Path(str(path) + ".keys.json").read_text())
        vals = struct.unpack("<%df" % (rows * dim), raw[16:])
        return unit_rows((keys[r], vals[r * dim:(r + 1) * dim]) for r in range(rows))
    doc = json.loads(raw)
    return unit_rows((e["key"], e["vec"]) for e in doc["entries"])


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


# ---- selection, rescoring ----

def topk_select(phr, phrase_emb, class_emb, vocab, k, template="a {}"):
    ids = [c["id"] for c in vocab["classes"]]
    chosen = set()
    for p in phr:
        key = p if p in phrase_emb else template.replace("{}", p, 1)
        q = phrase_emb[key]
        scored = [(-dot(q, class_emb[str(cid)]), idx) for idx, cid in enumerate(ids)]
        scored.sort()
        chosen.update(ids[idx] for _, idx in scored[:k])
    if not chosen:
        return set(ids), True
    return chosen, False


def classify(vec, allowed, class_emb):
    best, best_score = None, None
    for cid in sorted(allowed):
        s = dot(vec, class_emb[str(cid)])
        if best is None or s > best_score:
            best, best_score = cid, s
    return best, best_score


# ---- metrics ----

def iou(a, b):
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    if w <= 0 or h <= 0:
        return 0.0
    inter = w * h
    return inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)


def ap(dets, gts, cls, thr):
    g = [x for x in gts if x["class_id"] == cls]
    if not g:
        return None
    d = sorted((x for x in dets if x["class_id"] == cls), key=lambda x: -x["score"])
    used = [False] * len(g)
    tp, prec, rec = 0, [], []
    for n, det in enumerate(d, start=1):
        cands = [(iou(det["box"], gt["box"]), -i) for i, gt in enumerate(g)
                 if not used[i] and gt["image_id"] == det["image_id"]]
        cands = [c for c in cands if c[0] >= thr]
        if cands:
            used[-max(cands)[1]] = True
            tp += 1
        prec.append(tp / n)
        rec.append(tp / len(g))
    total = 0.0
    for r in range(101):
        total += max([p for p, rr in zip(prec, rec) if rr >= r / 100.0], default=0.0)
    return total / 101.0


def mean(xs):
    return sum(xs) / len(xs) if xs else None


def metrics(dets, gts, groups, adapted):
    classes = sorted({g["class_id"] for g in gts})
    per_class = {c: [ap(dets, gts, c, t) for t in THRESHOLDS] for c in classes}
    out = {"per_class": {str(c): v for c, v in per_class.items()}}
    for name, members in (("all", classes), ("base", [c for c in classes if groups.get(c) == "base"]),
                          ("novel", [c for c in classes if groups.get(c) == "novel"])):
        out["ap50_" + name] = mean([per_class[c][0] for c in members])
        out["map_" + name] = mean([mean(per_class[c]) for c in members])
    precisions, recalls = [], []
    for a in adapted:
        truth = {g["class_id"] for g in gts if g["image_id"] == a["image_id"]}
        sel = set(a["class_ids"])
        tp = len(sel & truth)
        precisions.append(tp / len(sel) if sel else 1.0)
        recalls.append(tp / len(truth) if truth else 1.0)
    out["vocab_precision"] = mean(precisions)
    out["vocab_recall"] = mean(recalls)
    return out


# ---- pipeline fixture ----

def pipeline_goldens(fix, lex):
    cfg_dir = fix / "pipeline"
    vocab = json.loads((cfg_dir / "vocabulary.json").read_text())
    gt_doc = json.loads((cfg_dir / "groundtruth.json").read_text())
    groups = {int(k): v for k, v in json.loads((cfg_dir / "groups.json").read_text()).items()}
    class_emb = load_emb(cfg_dir / "class_embeddings.vemb")
    phrase_emb = load_emb(cfg_dir / "phrase_embeddings.json")
    prop_emb = load_emb(cfg_dir / "proposal_embeddings.json")
    gts = [{"image_id": a["image_id"], "class_id": a["category_id"],
            "box": [a["bbox"][0], a["bbox"][1], a["bbox"][0] + a["bbox"][2], a["bbox"][1] + a["bbox"][3]]}
           for a in gt_doc["annotations"]]
    sizes = {im["id"]: (im["width"], im["height"]) for im in gt_doc["images"]}
    noun_lines = nouns_lines(cfg_dir / "captions.jsonl", lex)
    nouns = [json.loads(x) for x in noun_lines]
    all_ids = [c["id"] for c in vocab["classes"]]
    proposals = [json.loads(x) for x in (cfg_dir / "proposals.jsonl").read_text().splitlines() if x.strip()]

    files = {"nouns.jsonl": "\n".join(noun_lines) + "\n"}
    runs = {"baseline": None, "oracle": None, "topk1": 1, "topk2": 2}
    for run, k in runs.items():
        adapted = []
        for n in nouns:
            img = n["image_id"]
            if run == "baseline":
                ids, fb, sel = set(all_ids), False, "baseline"
            elif run == "oracle":
                ids, fb, sel = {g["class_id"] for g in gts if g["image_id"] == img}, False, "oracle"
            else:
                (ids, fb), sel = topk_select(n["phrases"], phrase_emb, class_emb, vocab, k), "embed-topk"
            adapted.append({"image_id": img, "class_ids": sorted(ids), "selector": sel, "fallback_used": fb})
        by_img = {a["image_id"]: a for a in adapted}
        dets = []
        for p in proposals:
            w, h = sizes[p["image_id"]]
            for box, key in zip(p["boxes"], p["embedding_keys"]):
                box = [min(max(box[0], 0), w), min(max(box[1], 0), h), min(max(box[2], 0), w), min(max(box[3], 0), h)]
                cid, score = classify(prop_emb[key], by_img[p["image_id"]]["class_ids"], class_emb)
                dets.append({"image_id": p["image_id"], "box": [float(x) for x in box], "class_id": cid,
                             "score": score})
        files[f"{run}/adapted.jsonl"] = "".join(dumps(a) + "\n" for a in adapted)
        files[f"{run}/detections.jsonl"] = "".join(dumps(d) + "\n" for d in dets)
        files[f"{run}/metrics.json"] = json.dumps(metrics(dets, gts, groups, adapted), indent=1, sort_keys=True) + "\n"
    return {cfg_dir / "goldens" / name: text for name, text in files.items()}


def close(a, b, tol):
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(close(a[k], b[k], tol) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(close(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        return isinstance(a, (int, float)) and isinstance(b, (int, float)) and abs(a - b) <= tol
    return a == b


def same(path, expected):
    if not path.exists():
        return False
    actual = path.read_text(encoding="utf-8")
    if path.name == "nouns.jsonl" or path.name == "adapted.jsonl":
        return actual == expected
    if path.suffix == ".jsonl":
        a = [json.loads(x) for x in actual.splitlines()]
        b = [json.loads(x) for x in expected.splitlines()]
        return close(a, b, SCORE_TOL)
    return close(json.loads(actual), json.loads(expected), METRIC_TOL)


def main():
    ap_ = argparse.ArgumentParser()
    ap_.add_argument("--fixtures", required=True, type=Path)
    ap_.add_argument("--lexicon", required=True, type=Path)
    ap_.add_argument("--check", action="store_true")
    args = ap_.parse_args()

    lex = load_lexicon(args.lexicon)
    goldens = {args.fixtures / "nouns" / "goldens" / "nouns.jsonl":
               "\n".join(nouns_lines(args.fixtures / "nouns" / "captions.jsonl", lex)) + "\n"}
    goldens.update(pipeline_goldens(args.fixtures, lex))

    bad = 0
    for path, text in sorted(goldens.items()):
        if args.check:
            if not same(path, text):
                print(f"MISMATCH {path}")
                bad += 1
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
            print(f"wrote {path}")
    if args.check:
        print(f"{len(goldens) - bad}/{len(goldens)} goldens match")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
