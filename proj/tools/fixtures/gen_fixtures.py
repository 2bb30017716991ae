#!/usr/bin/env python3
# Copyright 2026 The afort Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the synthetic test fixtures under tests/fixtures.

Output is deterministic; rerunning must leave `git diff` empty.

    python3 tools/fixtures/gen_fixtures.py [outdir]
"""

import csv
import io
import json
import random
import sys
from pathlib import Path

COLUMNS = ["text", "cor_start", "cor_end", "rem_start", "rem_end", "NAF", "prop1",
           "prop2", "logic", "class", "metaphor", "additive", "comment"]

# Class x logic grid of the reference corpus; rows NS, NR, PR, PS, Undefined.
GRID = {
    "NS": {"RE": 373, "PC": 225, "QU": 20, "SP": 113},
    "NR": {"RE": 40, "QU": 103, "SP": 1},
    "PR": {"RE": 33, "PC": 10, "QU": 6, "SP": 6},
    "PS": {"RE": 32, "QU": 18},
}
UNDEFINED_ROWS = 50
# Labelled rows whose annotators still judged them not a fortiori.
LABELLED_NAF = 14

SUBJECTS = ["He", "She", "My brother", "Our neighbour", "The new intern", "Grandpa", "The team",
            "My cousin", "The coach", "Our landlord", "Zoë", "The café owner", "José", "Most people",
            "The twins", "Aunt Renée", "The committee", "My roommate"]

# (correlate, remnant, elliptical remnant or None, prop1, prop2)
PAIRS = {
    "RE": [
        ("buy a used bike", "buy a new car", "a new car", "Financial cost", "Size"),
        ("spare an hour", "spare a whole week", "a whole week", "Time required", ""),
        ("pay the rent", "pay for a holiday abroad", None, "Financial cost", "Priority/pyramid of needs"),
        ("read the abstract", "read the whole thesis", "the whole thesis", "Time required", "Effort intellectual"),
        ("hire one assistant", "hire a full team", "a full team", "Financial cost", "Number of/amount of"),
        ("fix the leaking tap", "renovate the kitchen", None, "Financial cost", "Effort physical"),
        ("feed the cat", "adopt a second dog", None, "Financial cost", "Time required"),
        ("answer the emails", "write the annual report", None, "Time required", "Effort intellectual"),
        ("afford a coffee", "afford dinner out", "dinner out", "Financial cost", ""),
        ("attend the meeting", "lead the whole project", None, "Time required", "Importance"),
        ("keep the lights on", "expand the factory", None, "Financial cost", "Priority/pyramid of needs"),
        ("buy a textbook", "pay the tuition", None, "Financial cost", "Number of/amount of"),
        ("water the balcony plants", "tend a farm", None, "Time required", "Size"),
    ],
    "PC": [
        ("walk", "run", None, "Typical sequence of actions", "Skills needed"),
        ("read the notes", "play the sonata", None, "Skills needed", "Typical sequence of actions"),
        ("pass the qualifier", "win the final", "the final", "Typical sequence of actions", "Skills needed"),
        ("boil an egg", "cook a three-course dinner", None, "Skills needed", ""),
        ("speak basic French", "write a novel in French", None, "Skills needed", "Effort intellectual"),
        ("get an interview", "land the job", None, "Typical sequence of actions", ""),
        ("open the file", "edit the video", None, "Typical sequence of actions", "Skills needed"),
        ("ride a bicycle", "drive a truck", "a truck", "Skills needed", "Control level"),
        ("finish the first chapter", "finish the book", "the book", "Typical sequence of actions", "Time required"),
        ("tie a knot", "sail a boat", None, "Skills needed", "Typical sequence of actions"),
        ("solve the warm-up", "prove the theorem", None, "Skills needed", "Effort intellectual"),
        ("stand on skis", "ski the black run", None, "Skills needed", "Danger"),
    ],
    "QU": [
        ("lift a chair", "lift a sofa", "a sofa", "Other scalars (weight, temperature, volume)", "Effort physical"),
        ("eat one slice", "eat the whole pie", "the whole pie", "Number of/amount of", ""),
        ("swim one lap", "swim ten laps", "ten", "Number of/amount of", "Effort physical"),
        ("carry a bucket", "carry a barrel", "a barrel", "Other scalars (weight, temperature, volume)", "Size"),
        ("save a hundred dollars", "save a thousand dollars", "a thousand", "Number of/amount of", "Financial profit"),
        ("climb one flight of stairs", "climb the tower", None, "Distance", "Effort physical"),
        ("remember two names", "remember the whole guest list", None, "Number of/amount of", "Effort intellectual"),
        ("drink one glass", "finish the bottle", None, "Number of/amount of", ""),
        ("walk a block", "walk a mile", "a mile", "Distance", "Effort physical"),
        ("sell ten tickets", "fill the stadium", None, "Number of/amount of", "Size"),
    ],
    "SP": [
        ("visit the country", "visit its capital", "its capital", "Specific case of", "Proximity"),
        ("name a planet", "name the moons of Saturn", "the moons of Saturn", "Specific case of", "Familiarity/information accessibility"),
        ("recognize the genre", "name the composer", None, "Specific case of", "Familiarity/information accessibility"),
        ("find the street", "find the café on the corner", "the café on the corner", "Specific case of", "Proximity"),
        ("know the author", "quote the third chapter", None, "Specific case of", "Familiarity/information accessibility"),
        ("point to the continent", "point to the village", "the village", "Specific case of", "Size"),
        ("describe the symptoms", "diagnose the rare disease", None, "Specific case of", "Skills needed"),
        ("spot the bird", "identify the species", None, "Specific case of", "Familiarity/information accessibility"),
    ],
}

FRAMES = {
    "NS": ["{S} could not {C}, let alone {R}.", "{S} can't {C}, let alone {R}.",
           "{S} never managed to {C}, let alone {R}.", "{S} did not even try to {C}, let alone {R}."],
    "NR": ["{S} would refuse to {C}, let alone {R}.", "{S} would never agree to {C}, let alone {R}."],
    "PR": ["{S} could easily {C}, let alone {R}.", "{S} was ready to {C}, let alone {R}."],
    "PS": ["It is hard enough for {O} to {C}, let alone {R}.", "It takes effort for {O} to {C}, let alone {R}."],
}
TAILS = ["", " these days", " on a good day", " this year", " without help"]

UNDEFINED_TEMPLATES = [
    "{S} asked us to let alone the {T} until it dries.",
    "Let alone the {T} for now, {S2} will sort it out later.",
    "{S} said to let alone the {T} and go home.",
    "The sign read: let alone the {T}.",
    "We were told to let alone the {T} while the paint set.",
]
CARETAKERS = ["the caretaker", "the janitor", "someone", "the owner"]
THINGS = ["fence", "bread dough", "old piano", "garden gate", "wet floor", "bookshelf", "bike", "ladder",
          "kiln", "printer"]


def obj_form(subject):
    pronoun = {"He": "him", "She": "her", "Most people": "most people"}
    return pronoun.get(subject, subject[0].lower() + subject[1:] if subject.startswith("The ") else subject)


def csv_text(rows, header=COLUMNS):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([r.get(c, "") for c in header])
    return buf.getvalue()


def make_row(text, cor, rem, naf, prop1, prop2, logic, cls, rng, comment=""):
    row = {"text": text, "NAF": "Yes" if naf else "No", "prop1": prop1, "prop2": prop2,
           "logic": logic, "class": cls, "comment": comment,
           "metaphor": "Yes" if rng.random() < 0.05 else "No",
           "additive": "Yes" if rng.random() < 0.1 else "No"}
    if cor is not None:
        # Correlate precedes the marker, remnant follows it.
        marker = text.index("let alone")
        cs = text.rfind(cor, 0, marker)
        rs = text.find(rem, marker)
        assert cs >= 0 and rs >= 0, (text, cor, rem)
        row.update({"cor_start": cs, "cor_end": cs + len(cor), "rem_start": rs, "rem_end": rs + len(rem)})
    return row


def build_corpus(rng):
    rows, used = [], set()
    for logic, cols in GRID.items():
        for cls, count in cols.items():
            combos = [(s, f, p, t) for s in SUBJECTS for f in FRAMES[logic] for p in PAIRS[cls] for t in TAILS]
            rng.shuffle(combos)
            made = 0
            for s, f, p, t in combos:
                if made == count:
                    break
                c, r, ell, p1, p2 = p
                if logic in ("NR", "PR"):
                    c, r, ell = r, c, None
                remnant = ell if ell and rng.random() < 0.3 else r
                text = f.format(S=s, O=obj_form(s), C=c, R=remnant)
                text = text[:-1] + t + "."
                if text in used:
                    continue
                used.add(text)
                comment = "elliptical remnant" if remnant is not r else ""
                rows.append(make_row(text, c, remnant, False, p1, p2, logic, cls, rng, comment))
                made += 1
            assert made == count, (logic, cls)
    # Some RE/NS rows were judged NAF by the annotators; their spans read
    # coherently only when exchanged.
    re_ns = [i for i, r in enumerate(rows) if r["logic"] == "NS" and r["class"] == "RE"]
    for i in rng.sample(re_ns, LABELLED_NAF):
        r = rows[i]
        r["NAF"] = "Yes"
        r["comment"] = "reads with correlate and remnant exchanged"
    made = 0
    for tmpl in UNDEFINED_TEMPLATES:
        for thing in THINGS:
            if made == UNDEFINED_ROWS:
                break
            s = SUBJECTS[made % len(SUBJECTS)]
            s2 = CARETAKERS[made % len(CARETAKERS)]
            text = tmpl.format(S=s, S2=s2, T=thing)
            if text in used:
                continue
            used.add(text)
            rows.append(make_row(text, None, None, True, "", "", "", "", rng))
            made += 1
    assert made == UNDEFINED_ROWS
    rng.shuffle(rows)
    return rows


def identification_script(rows, matrix, rng):
    """matrix[pred][gold] with pred/gold in AF, NAF, Unknown order."""
    ids = {"AF": [], "NAF": []}
    for i, r in enumerate(rows, start=1):
        ids["NAF" if r["NAF"] == "Yes" else "AF"].append(str(i))
    out = []
    for g, gold in enumerate(("AF", "NAF")):
        pool = ids[gold][:]
        rng.shuffle(pool)
        need = sum(matrix[p][g] for p in range(3))
        assert need == len(pool), (gold, need, len(pool))
        at = 0
        for p, pred in enumerate(("AF", "NAF", "Unknown")):
            for k in range(matrix[p][g]):
                rid = pool[at]
                at += 1
                if pred == "Unknown" and k % 2:
                    resp = "It is not possible to determine whether this sentence is an a fortiori argument."
                else:
                    resp = {"verdict": pred}
                out.append({"record_id": rid, "task": "identify", "response": resp})
    out.sort(key=lambda e: int(e["record_id"]))
    return out


def span(text, phrase):
    i = text.index(phrase)
    return i, i + len(phrase)


# Hand-written small fixture: (text, correlate, remnant, naf, prop1, prop2,
# logic, class, topic)
SMALL = [
    ("He could not lift a chair, let alone a sofa.", "lift a chair", "a sofa", False,
     "Other scalars (weight, temperature, volume)", "Effort physical", "NS", "QU", "furniture"),
    ("The memo does not explain, let alone justify, the sudden budget cuts.", "explain", "justify", False,
     "Effort intellectual", "Typical sequence of actions", "NS", "PC", "budget"),
    ("I barely have time to skim the headlines, let alone read the full report.", "skim the headlines",
     "read the full report", False, "Time required", "Effort intellectual", "NS", "RE", "news"),
    ("She can't boil an egg, let alone cook a three-course dinner.", "boil an egg", "cook a three-course dinner",
     False, "Skills needed", "Typical sequence of actions", "NS", "PC", "cooking"),
    ("We never visited the country, let alone its capital.", "visited the country", "its capital", False,
     "Specific case of", "Proximity", "NS", "SP", "travel"),
    ("Please let alone the bread dough until it has risen.", None, None, True, "", "", "", "", "baking"),
    ("It is hard enough to keep one plant alive, let alone a whole garden.", "keep one plant alive",
     "a whole garden", False, "Number of/amount of", "Effort physical", "PS", "QU", "gardening"),
    ("He wouldn't risk a dollar on a lottery ticket, let alone his savings.", "a dollar", "his savings", False,
     "Financial cost", "Importance", "NR", "RE", "money"),
    ("They could afford a used bike, let alone a new car.", "a used bike", "a new car", True,
     "Financial cost", "Size", "NS", "RE", "cars"),
    ("Mía could easily run a mile, let alone walk to the corner shop.", "run a mile", "walk to the corner shop",
     False, "Distance", "Effort physical", "PR", "PC", "fitness"),
    ("I can hardly finish a race in Mario Kart, let alone win the grand prix.", "finish a race in Mario Kart",
     "win the grand prix", False, "Skills needed", "Typical sequence of actions", "NS", "PC", "video games"),
    ("The startup cannot pay its interns, let alone hire a full team.", "pay its interns", "hire a full team",
     False, "Financial cost", "Number of/amount of", "NS", "RE", "business"),
    ("Few students can name the planets, let alone the moons of Saturn.", "name the planets",
     "the moons of Saturn", False, "Specific case of", "Familiarity/information accessibility", "NS", "SP",
     "astronomy"),
    ("José would not swim one lap in that cold lake, let alone ten.", "swim one lap", "ten", False,
     "Number of/amount of", "Effort physical", "NS", "QU", "swimming"),
    ("The senator refused to discuss the bill, let alone vote for it.", "discuss the bill", "vote for it", False,
     "Typical sequence of actions", "Importance", "NS", "PC", "politics"),
    ("Our village has no clinic, let alone a hospital.", "clinic", "a hospital", False, "Specific case of",
     "Size", "NS", "SP", "healthcare"),
    ("I would not lend him my bike, let alone my car.", "my bike", "my car", False, "Financial cost",
     "Importance", "NR", "RE", "transportation"),
    ("Even a trained chef struggles with this recipe, let alone a beginner.", "a trained chef", "a beginner",
     False, "Skills needed", "", "PR", "PC", "recipes"),
    ("The old bridge can barely hold a bicycle, let alone a loaded truck.", "hold a bicycle", "a loaded truck",
     False, "Other scalars (weight, temperature, volume)", "Size", "NS", "QU", "traffic"),
    ("She has never painted a portrait, let alone held an exhibition.", "painted a portrait",
     "held an exhibition", False, "Typical sequence of actions", "Skills needed", "NS", "PC", "art"),
]

# Predictions differ from gold in a few places so the reports have texture.
PRED_OVERRIDES = {
    "3": {"correlate": "time to skim the headlines"},
    "5": {"sentence_type": "QU"},
    "8": {"logic_category": "NS", "correlate": "risk a dollar"},
    "13": {"remnant": "name the moons of Saturn"},
    "16": {"correlate": "no clinic", "property2": "Proximity"},
    "18": {"sentence_type": "QU", "logic_category": "PS"},
}

SHORT = {
    "QU": "{X} requires less than {Y}.",
    "RE": "{X} costs fewer resources than {Y}.",
    "PC": "{X} comes before {Y}.",
    "SP": "{X} is more general than {Y}.",
}


def small_rows():
    rows = []
    rng = random.Random(11)
    for (text, c, r, naf, p1, p2, logic, cls, _topic) in SMALL:
        rows.append(make_row(text, c, r, naf, p1, p2, logic, cls, rng))
    return rows


def interpretation_payload(i, entry):
    text, c, r, naf, p1, p2, logic, cls, _topic = entry
    if naf and c is None:
        return {"verdict": "NAF", "correlate": None, "remnant": None, "sentence_type": "Undefined",
                "logic_category": "Undefined", "property1": None, "property2": None,
                "short_explanation": "", "long_explanation": "The phrase means leave undisturbed here."}
    if naf:
        return {"verdict": "NAF", "correlate": r, "remnant": c, "correlate_more_likely": False,
                "sentence_type": cls, "logic_category": logic, "property1": p1, "property2": p2 or None,
                "short_explanation": "", "long_explanation": "The comparison runs the wrong way."}
    out = {"verdict": "AF", "correlate": c, "remnant": r, "correlate_more_likely": True,
           "likelihood_rationale": f"{c} is the easier case.", "sentence_type": cls, "logic_category": logic,
           "property1": p1, "property2": p2 or None,
           "short_explanation": SHORT[cls].format(X=c[0].upper() + c[1:], Y=r),
           "long_explanation": f"The sentence denies the easier case, {c}. The harder case, {r}, follows."}
    out.update(PRED_OVERRIDES.get(str(i), {}))
    return out


SIMILAR_NEW = {
    "furniture": ("She could not move a lamp, let alone a wardrobe.", "move a lamp", "a wardrobe", "home"),
    "budget": ("The report does not describe, let alone defend, the new tax rules.", "describe", "defend", "taxes"),
    "news": ("He barely reads the captions, let alone the full articles.", "reads the captions", "the full articles", "journalism"),
    "cooking": ("He can't toast bread, let alone bake a wedding cake.", "toast bread", "bake a wedding cake", "food"),
    "travel": ("They never saw the coast, let alone its islands.", "saw the coast", "its islands", "tourism"),
    "baking": ("Let alone the cake until it cools down.", "", "", "food"),
    "gardening": ("It is hard enough to grow one tomato, let alone a whole crop.", "grow one tomato", "a whole crop", "farming"),
    "money": ("She wouldn't bet a coin, let alone her house.", "a coin", "her house", "finance"),
    "cars": ("We could afford a scooter, let alone a van.", "a scooter", "a van", "driving"),
    "fitness": ("Leo could easily jog a mile, let alone stroll to the bakery.", "jog a mile", "stroll to the bakery", "health"),
    "video games": ("I can hardly beat the first level of Tetris, let alone finish the game.", "beat the first level of Tetris", "finish the game", "games"),
    "business": ("The shop cannot pay its suppliers, let alone open a second branch.", "pay its suppliers", "open a second branch", "economy"),
    "astronomy": ("Few people can spot Mars, let alone the rings of Saturn.", "spot Mars", "the rings of Saturn", "space"),
    "swimming": ("Ana would not run one lap in that heat, let alone five.", "run one lap", "five", "athletics"),
    "politics": ("The minister refused to read the petition, let alone sign it.", "read the petition", "sign it", "government"),
    "healthcare": ("Our town has no pharmacy, let alone a hospital.", "pharmacy", "a hospital", "medicine"),
    "transportation": ("I would not lend her my scooter, let alone my truck.", "my scooter", "my truck", "cars"),
    "recipes": ("Even a seasoned baker struggles with this bread, let alone a novice.", "a seasoned baker", "a novice", "cooking"),
    "traffic": ("The ferry can barely carry a car, let alone a bus.", "carry a car", "a bus", "travel"),
    "art": ("He has never sketched a face, let alone sold a painting.", "sketched a face", "sold a painting", "painting"),
}

NOVEL_NEW = {
    "furniture": ("The rookie could not hold the puck, let alone score a goal.", "hold the puck", "score a goal", "sports"),
    "budget": ("The study does not describe, let alone prove, the effect of the drug.", "describe", "prove", "medicine"),
    "news": ("He barely knows the chords, let alone the whole song.", "knows the chords", "the whole song", "music"),
    "cooking": ("He can't change a tyre, let alone rebuild an engine.", "change a tyre", "rebuild an engine", "cars"),
    "travel": ("They never read the first volume, let alone its sequels.", "read the first volume", "its sequels", "literature"),
    "baking": ("Let alone the soldiers sleep, the captain said.", "", "", "military"),
    "gardening": ("It is hard enough to learn one language, let alone five.", "learn one language", "five", "language"),
    "money": ("She wouldn't share a rumour, let alone a secret.", "a rumour", "a secret", "friendship"),
    "cars": ("We could read the summary, let alone the full ruling.", "the summary", "the full ruling", "law"),
    "fitness": ("Leo could easily solve the sum, let alone count to ten.", "solve the sum", "count to ten", "mathematics"),
    "video games": ("I can hardly follow the sermon, let alone explain the doctrine.", "follow the sermon", "explain the doctrine", "religion"),
    "business": ("The village cannot repair its well, let alone build a dam.", "repair its well", "build a dam", "energy"),
    "astronomy": ("Few voters can name their mayor, let alone every councillor.", "name their mayor", "every councillor", "elections"),
    "swimming": ("Ana would not eat one oyster, let alone a dozen.", "eat one oyster", "a dozen", "food"),
    "politics": ("The student refused to open the textbook, let alone study it.", "open the textbook", "study it", "school"),
    "healthcare": ("Our library has no computer, let alone a server room.", "computer", "a server room", "technology"),
    "transportation": ("I would not lend him my pen, let alone my laptop.", "my pen", "my laptop", "computers"),
    "recipes": ("Even a veteran soldier fears that pass, let alone a recruit.", "a veteran soldier", "a recruit", "war"),
    "traffic": ("The shelf can barely hold a vase, let alone the encyclopedia.", "hold a vase", "the encyclopedia", "furniture"),
    "art": ("She has never planted a seed, let alone harvested a field.", "planted a seed", "harvested a field", "agriculture"),
}


def augmentation_script(table, base_payloads):
    out = []
    for i, entry in enumerate(SMALL, start=1):
        topic = entry[8]
        new, c, r, new_topic = table[topic]
        payload = dict(base_payloads[i - 1])
        payload.update({"topic": topic, "new_topic": new_topic, "new_sentence": new})
        # Analysis of the new sentence keeps the gold labels of the source.
        payload["sentence_type"] = entry[7] or "Undefined"
        payload["logic_category"] = entry[6] or "Undefined"
        if c:
            payload.update({"verdict": "AF", "correlate": c, "remnant": r})
        else:
            payload.update({"verdict": "NAF", "correlate": None, "remnant": None})
        out.append({"record_id": str(i), "task": "augment", "response": payload})
    return out


def drift_script(base_payloads):
    # Mario Kart source; the "similar" rewrite wanders off to the piano.
    i = 11
    payload = dict(base_payloads[i - 1])
    payload.update({"topic": "video games", "new_topic": "piano",
                    "new_sentence": "I can hardly play a scale on the piano, let alone perform a sonata at a concert.",
                    "correlate": "play a scale on the piano", "remnant": "perform a sonata at a concert"})
    return [{"record_id": str(i), "task": "augment", "response": payload}]


def write(path, text):
    path.write_text(text, encoding="utf-8")


def jsonl(entries):
    return "".join(json.dumps(e, ensure_ascii=False, sort_keys=True) + "\n" for e in entries)


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[2] / "tests" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20260301)
    rows = build_corpus(rng)
    write(out / "corpus_1030.csv", csv_text(rows))
    with_examples = [[483, 31, 0], [308, 25, 0], [175, 8, 0]]
    # The published without-examples matrix has gold columns 965/65, one
    # off the corpus's 966/64; one Unknown row NAF moves to AF.
    without_examples = [[50, 7, 0], [660, 40, 0], [256, 17, 0]]
    write(out / "identify_with_examples.jsonl", jsonl(identification_script(rows, with_examples, random.Random(1))))
    write(out / "identify_without_examples.jsonl",
          jsonl(identification_script(rows, without_examples, random.Random(2))))

    small = small_rows()
    write(out / "corpus_20.csv", csv_text(small))
    write(out / "corpus_10.csv", csv_text(small[:10]))
    payloads = [interpretation_payload(i, e) for i, e in enumerate(SMALL, start=1)]
    write(out / "interpret_20.jsonl",
          jsonl({"record_id": str(i), "task": "interpret", "response": p} for i, p in enumerate(payloads, start=1)))
    write(out / "augment_similar_20.jsonl", jsonl(augmentation_script(SIMILAR_NEW, payloads)))
    write(out / "augment_novel_20.jsonl", jsonl(augmentation_script(NOVEL_NEW, payloads)))
    write(out / "augment_drift.jsonl", jsonl(drift_script(payloads)))


if __name__ == "__main__":
    main()
