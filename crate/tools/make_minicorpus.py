#!/usr/bin/env python3
"""Regenerate data/minicorpus.jsonl, the bundled offline test corpus.

The corpus describes an invented world (people, cities, rivers, works,
organisations, countries). Every fact is stated in several documents with
different wording, so a sentence blanked in one document usually has an
answer-bearing passage elsewhere. All text is machine-generated from the
word lists below and is released into the public domain (CC0).

Usage: python3 tools/make_minicorpus.py > data/minicorpus.jsonl
"""

import json
import random
import sys

SEED = 20191015

ONSETS = ["b", "br", "c", "ch", "d", "dr", "f", "g", "gr", "h", "j", "k", "l",
          "m", "n", "p", "r", "s", "sh", "st", "t", "th", "tr", "v", "w", "z"]
VOWELS = ["a", "e", "i", "o", "u", "ae", "ia", "ou", "ei"]
CODAS = ["", "", "n", "r", "l", "s", "th", "nd", "rk", "m", "st", "x"]
CITY_SUFFIX = ["ford", "field", "haven", "mouth", "stead", "bury", "ton", "gard", "holm", "wick"]

OCCUPATIONS = ["poet", "painter", "engineer", "botanist", "composer", "architect",
               "astronomer", "novelist", "chemist", "cartographer", "sculptor", "historian"]
WORK_KINDS = {
    "poet": "poem", "painter": "painting", "engineer": "treatise", "botanist": "herbal",
    "composer": "symphony", "architect": "treatise", "astronomer": "treatise",
    "novelist": "novel", "chemist": "treatise", "cartographer": "atlas",
    "sculptor": "statue", "historian": "chronicle",
}
ORG_KINDS = ["university", "magazine", "society", "academy", "company", "observatory"]
INDUSTRIES = ["shipbuilding", "weaving", "glassmaking", "brewing", "printing", "mining",
              "fishing", "tanning", "clockmaking", "pottery", "silverwork", "milling"]
LANDMARK_KINDS = ["Bridge", "Cathedral", "Tower", "Market", "Gate", "Library", "Harbour", "Palace"]
SEAS = ["Amber Sea", "Northern Sound", "Gulf of Veyra", "Pale Sea", "Bay of Sorrel"]
TITLE_WORDS = ["Silver", "Harbor", "Winter", "Lantern", "Orchard", "Evening", "Crimson",
               "Garden", "Mirror", "Falcon", "Hollow", "Meadow", "Tempest", "Ember",
               "Willow", "Sparrow", "Granite", "Violet", "Anchor", "Thistle", "Beacon",
               "Marble", "Copper", "Solstice", "Raven", "Tide", "Ivory", "Summit"]
ADJECTIVES = ["quiet", "ancient", "prosperous", "rugged", "fertile", "crowded", "elegant",
              "austere", "vibrant", "humble", "sprawling", "remote", "industrious", "serene",
              "windswept", "modest", "ornate", "celebrated", "forgotten", "turbulent",
              "gentle", "northern", "southern", "coastal", "wooded", "marshy", "sunlit",
              "restless", "peculiar", "graceful", "stubborn", "generous", "scholarly",
              "meticulous", "eccentric", "reclusive", "ambitious", "patient", "fearless"]
NOUNS = ["orchards", "vineyards", "workshops", "granaries", "chapels", "fountains",
         "meadows", "quarries", "harbours", "markets", "bridges", "gardens", "festivals",
         "manuscripts", "lanterns", "tapestries", "instruments", "observations",
         "sketches", "letters", "pamphlets", "lectures", "collections", "experiments",
         "voyages", "debates", "rivalries", "friendships", "apprentices", "patrons"]
SEASONS = ["spring", "summer", "autumn", "winter"]
LANGUAGES = ["Veyran", "Ostric", "Malden", "Sorelic", "Tharic", "Pellish", "Aurenic", "Kestic"]
CURRENCIES = ["crown", "florin", "mark", "thaler", "ducat", "shilling"]


class World:
    def __init__(self, rng):
        self.rng = rng
        self.used = set()

    def word(self, syllables):
        while True:
            w = "".join(self.rng.choice(ONSETS) + self.rng.choice(VOWELS) + self.rng.choice(CODAS)
                        for _ in range(syllables))
            w = w.capitalize()
            if 4 <= len(w) <= 11 and w not in self.used:
                self.used.add(w)
                return w


def build_world(rng):
    w = World(rng)
    countries = [{"type": "country", "name": w.word(2) + rng.choice(["ia", "land", "mark", "ora"]),
                  "language": rng.choice(LANGUAGES), "currency": rng.choice(CURRENCIES)}
                 for _ in range(30)]
    rivers = [{"type": "river", "name": w.word(2), "mountain": "Mount " + w.word(2),
               "sea": rng.choice(SEAS), "length": rng.randrange(80, 1400, 5), "cities": []}
              for _ in range(40)]
    cities = []
    for _ in range(220):
        c = {"type": "city", "name": w.word(1) + rng.choice(CITY_SUFFIX),
             "country": rng.choice(countries), "river": rng.choice(rivers),
             "founded": rng.randrange(700, 1600),
             "landmark": w.word(2) + " " + rng.choice(LANDMARK_KINDS),
             "industry": rng.choice(INDUSTRIES), "natives": [], "works": [], "orgs": []}
        c["river"]["cities"].append(c)
        cities.append(c)
    for co in countries:
        co["capital"] = rng.choice(cities)
    firsts = [w.word(rng.choice([1, 2])) for _ in range(140)]
    surnames = [w.word(2) for _ in range(320)]
    persons = []
    seen = set()
    while len(persons) < 380:
        name = rng.choice(firsts) + " " + rng.choice(surnames)
        if name in seen:
            continue
        seen.add(name)
        born = rng.randrange(1650, 1900)
        p = {"type": "person", "name": name, "occupation": rng.choice(OCCUPATIONS),
             "city": rng.choice(cities), "born": born, "died": born + rng.randrange(35, 90),
             "traits": rng.sample(ADJECTIVES, 2), "works": [], "mentor": None, "students": []}
        p["city"]["natives"].append(p)
        persons.append(p)
    for p in persons:
        older = [q for q in persons if q["born"] + 15 < p["born"] < q["died"] and q["occupation"] == p["occupation"]]
        if older:
            p["mentor"] = rng.choice(older)
            p["mentor"]["students"].append(p)
    orgs = []
    for _ in range(130):
        kind = rng.choice(ORG_KINDS)
        base = w.word(2)
        name = {"university": "University of " + base, "magazine": base + " Review",
                "society": "Society of " + base, "academy": base + " Academy",
                "company": base + " Company", "observatory": base + " Observatory"}[kind]
        founder = rng.choice(persons)
        o = {"type": "org", "name": name, "kind": kind, "founder": founder,
             "city": rng.choice(cities), "founded": founder["born"] + rng.randrange(25, 45),
             "members": []}
        o["city"]["orgs"].append(o)
        orgs.append(o)
    for p in persons:
        p["org"] = rng.choice(orgs)
        p["org"]["members"].append(p)
    works = []
    titles = set()
    for _ in range(200):
        author = rng.choice(persons)
        while True:
            t = "The " + " ".join(rng.sample(TITLE_WORDS, rng.choice([1, 2])))
            if t not in titles:
                titles.add(t)
                break
        wk = {"type": "work", "name": t, "kind": WORK_KINDS[author["occupation"]], "author": author,
              "year": author["born"] + rng.randrange(20, max(21, author["died"] - author["born"])),
              "publisher": rng.choice(orgs), "setting": rng.choice(cities)}
        author["works"].append(wk)
        wk["setting"]["works"].append(wk)
        works.append(wk)
    return persons, cities, works, orgs, rivers, countries


def a(word):
    return ("an " if word[0] in "aeiou" else "a ") + word


def filler(rng, subject):
    adj, adj2 = rng.sample(ADJECTIVES, 2)
    noun, noun2 = rng.sample(NOUNS, 2)
    season = rng.choice(SEASONS)
    t = rng.choice([
        "Visitors often remarked on the {adj} {noun} that surrounded {s} during the {season} months.",
        "Contemporary accounts linked {s} with {adj} {noun} and {adj2} {noun2}.",
        "Several {adj} {noun} associated with {s} survive, although most of the {noun2} were lost.",
        "Local records mention {noun} and {noun2}, which gave {s} a {adj} reputation.",
        "In later years the {noun} of {s} were described as {adj} rather than {adj2}.",
    ])
    return t.format(adj=adj, adj2=adj2, noun=noun, noun2=noun2, season=season, s=subject,
                    adj_a=a(adj))


def person_doc(rng, p):
    n, last = p["name"], p["name"].split()[-1]
    c = p["city"]
    paras = []
    s = [rng.choice([
        f"{n} ({p['born']}–{p['died']}) was {a(p['occupation'])} from {c['name']} in {c['country']['name']}.",
        f"{n} was {a(p['traits'][0] + ' ' + p['occupation'])} born in {c['name']}, {c['country']['name']}, in {p['born']}.",
    ])]
    s.append(rng.choice([
        f"{last} grew up near the {c['landmark']} and spoke {c['country']['language']} at home.",
        f"As a child {last} watched the {c['industry']} workshops along the {c['river']['name']} river.",
    ]))
    s.append(f"Friends described {last} as {p['traits'][0]} and {p['traits'][1]}.")
    s.append(filler(rng, last))
    paras.append(s)
    s = []
    if p["mentor"]:
        m = p["mentor"]
        s.append(rng.choice([
            f"{last} studied under the {m['occupation']} {m['name']}, whose methods shaped the early work.",
            f"The young {last} became a pupil of {m['name']} after moving to {m['city']['name']}.",
        ]))
    o = p["org"]
    s.append(rng.choice([
        f"{last} later joined the {o['name']}, which was based in {o['city']['name']}.",
        f"Membership in the {o['name']} brought {last} into contact with its founder {o['founder']['name']}.",
    ]))
    for wk in p["works"]:
        s.append(rng.choice([
            f"In {wk['year']} {last} completed {wk['name']}, {a(wk['kind'])} set in {wk['setting']['name']}.",
            f"{wk['name']} is {a(wk['kind'])} by {n}, issued by the {wk['publisher']['name']} in {wk['year']}.",
            f"{last}'s {wk['kind']} {wk['name']} drew on memories of {wk['setting']['name']}.",
        ]))
    s.append(filler(rng, last))
    paras.append(s)
    s = []
    for st in p["students"][:3]:
        s.append(f"Among the students of {last} was {st['name']}, who was born in {st['city']['name']}.")
    s.append(rng.choice([
        f"{last} died in {p['died']}, and a memorial stands near the {c['landmark']} in {c['name']}.",
        f"After a long career {n} died in {p['died']} and was buried in {c['name']}.",
    ]))
    s.append(filler(rng, last))
    paras.append(s)
    return paras


def city_doc(rng, c):
    n = c["name"]
    co, rv = c["country"], c["river"]
    paras = [[
        rng.choice([
            f"{n} is a city in {co['name']} on the banks of the {rv['name']} river.",
            f"{n} lies on the {rv['name']} river in the {rng.choice(['north', 'south', 'east', 'west'])} of {co['name']}.",
        ]),
        rng.choice([
            f"The settlement was founded in {c['founded']} and grew around the {c['landmark']}.",
            f"Records date the founding of {n} to {c['founded']}, when the first {c['industry']} guild appeared.",
        ]),
        f"The economy of {n} depended on {c['industry']} for several centuries.",
        filler(rng, n),
    ]]
    s = []
    for p in c["natives"][:4]:
        s.append(rng.choice([
            f"The {p['occupation']} {p['name']} was born here in {p['born']}.",
            f"{n} is the birthplace of {p['name']}, a {p['traits'][1]} {p['occupation']}.",
            f"Natives of {n} include {p['name']}, remembered as {a(p['occupation'])}.",
        ]))
    for o in c["orgs"][:2]:
        s.append(f"The city is home to the {o['name']}, established by {o['founder']['name']} in {o['founded']}.")
    for wk in c["works"][:2]:
        s.append(f"{wk['name']}, {a(wk['kind'])} by {wk['author']['name']}, takes place in {n}.")
    if s:
        s.append(filler(rng, n))
        paras.append(s)
    paras.append([
        f"Residents of {n} speak {co['language']} and trade in the {co['currency']}.",
        filler(rng, n),
        filler(rng, "the city"),
    ])
    return paras


def work_doc(rng, wk):
    n, au = wk["name"], wk["author"]
    last = au["name"].split()[-1]
    paras = [[
        rng.choice([
            f"{n} is {a(wk['kind'])} written by {au['name']} and first published in {wk['year']}.",
            f"{n} is {a(wk['kind'])} by the {au['occupation']} {au['name']}, completed in {wk['year']}.",
        ]),
        rng.choice([
            f"{n} is set in {wk['setting']['name']}, near the {wk['setting']['landmark']}.",
            f"The scenes of {n} take place along the {wk['setting']['river']['name']} river in {wk['setting']['name']}.",
        ]),
        f"{n} was released by the {wk['publisher']['name']} in {wk['publisher']['city']['name']}.",
        filler(rng, "the " + wk["kind"]),
    ], [
        rng.choice([
            f"Critics connected {n} with the childhood of {last} in {au['city']['name']}.",
            f"{last} began {n} after leaving {au['city']['name']} for {au['org']['city']['name']}.",
        ]),
        f"Early readers found {n} {au['traits'][0]} and sometimes {au['traits'][1]}.",
        filler(rng, n),
        filler(rng, "its author"),
    ]]
    return paras


def org_doc(rng, o):
    n, f = o["name"], o["founder"]
    paras = [[
        rng.choice([
            f"The {n} is {a(o['kind'])} founded in {o['founded']} by {f['name']} in {o['city']['name']}.",
            f"{f['name']} established the {n} in {o['city']['name']} in {o['founded']}.",
        ]),
        f"The first meetings of the {n} were held near the {o['city']['landmark']} in {o['city']['name']}.",
        filler(rng, "the " + o["kind"]),
    ]]
    s = []
    for m in o["members"][:4]:
        s.append(rng.choice([
            f"Notable members included the {m['occupation']} {m['name']}, a native of {m['city']['name']}.",
            f"{m['name']}, who was born in {m['born']}, belonged to the {o['kind']} for many years.",
        ]))
    s.append(filler(rng, n))
    s.append(filler(rng, "the members"))
    paras.append(s)
    return paras


def river_doc(rng, r):
    n = r["name"]
    cs = r["cities"][:5]
    paras = [[
        f"The {n} is a river that rises on {r['mountain']} and flows into the {r['sea']}.",
        f"It is about {r['length']} kilometres long and has long been used for {rng.choice(INDUSTRIES)}.",
        filler(rng, "the river"),
    ]]
    s = [f"The {n} passes the city of {c['name']}, known for its {c['industry']}." for c in cs]
    s.append(filler(rng, "the valley"))
    s.append(filler(rng, n))
    paras.append(s)
    return paras


def country_doc(rng, co):
    n = co["name"]
    return [[
        f"{n} is a country whose capital is {co['capital']['name']}.",
        f"The official language of {n} is {co['language']} and the currency is the {co['currency']}.",
        filler(rng, n),
        filler(rng, "the country"),
    ], [
        f"The capital {co['capital']['name']} stands on the {co['capital']['river']['name']} river.",
        filler(rng, "the capital"),
        filler(rng, "the provinces"),
    ]]


def main():
    rng = random.Random(SEED)
    persons, cities, works, orgs, rivers, countries = build_world(rng)
    builders = ([(person_doc, p) for p in persons] + [(city_doc, c) for c in cities]
                + [(work_doc, wk) for wk in works] + [(org_doc, o) for o in orgs]
                + [(river_doc, r) for r in rivers] + [(country_doc, co) for co in countries])
    rng.shuffle(builders)
    out = sys.stdout
    for i, (build, ent) in enumerate(builders):
        paras = build(rng, ent)
        text = "\n\n".join(" ".join(s) for s in paras if s)
        rec = {"id": f"doc{i:04d}", "title": ent["name"], "text": text}
        out.write(json.dumps(rec, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
