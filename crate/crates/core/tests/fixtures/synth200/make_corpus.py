# Regenerates corpus.jsonl. Output is fixed by the seed below.
import json
import random

rng = random.Random(7)

mentions = (
    [("fever", 15), ("fevers", 5), ("cough", 12), ("coughing", 8), ("headache", 14), ("headaches", 4),
     ("tired", 16), ("sore throat", 12), ("brain fog", 11), ("lol", 10), ("weird", 10), ("chills", 3)]
)
pre = ["ugh", "woke up with", "day three and still", "cannot shake this", "anyone else get", "back again with"]
post = ["all day", "since monday", "after the second dose", "at night", "this week", "again"]
noise = [
    "staying home and baking bread", "zoom call ran long today", "walked the dog around the block",
    "grocery run with a mask on", "watching the news again", "working from the kitchen table",
    "missing my friends a lot", "new puzzle arrived this morning", "planted tomatoes in the yard",
    "cleaned out the garage finally",
]

rows = []
for surface, n in mentions:
    for _ in range(n):
        rows.append(dict(text=f"{rng.choice(pre)} {surface} {rng.choice(post)}", lang="en"))
for surface in ["fever"] * 10:
    rows.append(dict(text=f"{rng.choice(pre)} {surface} {rng.choice(post)}", lang="en", is_retweet=True))
for surface in ["cough"] * 10:
    rows.append(dict(text=f"{rng.choice(pre)} {surface} https://example.org/x", lang="en"))
for surface in ["fever"] * 10:
    rows.append(dict(text=f"tengo {surface} hoy", lang="es"))
for i in range(50):
    rows.append(dict(text=f"{noise[i % len(noise)]}", lang="en"))
rng.shuffle(rows)
assert len(rows) == 200

with open("corpus.jsonl", "w") as f:
    for i, r in enumerate(rows):
        rec = {"id": f"t{i + 1:03d}", "text": r["text"], "lang": r["lang"],
               "created_at": f"2020-04-{1 + i // 24:02d}T{i % 24:02d}:00:00Z"}
        if r.get("is_retweet"):
            rec["is_retweet"] = True
        f.write(json.dumps(rec) + "\n")
