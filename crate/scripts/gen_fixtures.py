"""Generate the synthetic WVS-shaped fixture corpora shipped in fixtures/."""
import json
import os
import random

ROOT = os.path.join(os.path.dirname(__file__), "..", "fixtures")

AGREE4 = ["strongly agree", "agree", "disagree", "strongly disagree"]
AGREE4_MAP = {"strongly agree": "agree", "agree": "agree", "disagree": "disagree", "strongly disagree": "disagree"}
AGREE_INSTR = ("For each of the following statements I read out, can you tell me how strongly you agree "
               "or disagree with each. Do you strongly agree, agree, disagree, or strongly disagree?")
GOOD4 = ["very good", "fairly good", "fairly bad", "very bad"]
GOOD4_MAP = {"very good": "agree", "fairly good": "agree", "fairly bad": "disagree", "very bad": "disagree"}
GOOD_INSTR = ("I'm going to describe various types of political systems and ask what you think about each "
              "as a way of governing this country. For each one, would you say it is a very good, fairly good, "
              "fairly bad or very bad way of governing this country?")
IMP4 = ["very important", "rather important", "not very important", "not at all important"]
IMP4_MAP = {"very important": "agree", "rather important": "agree", "not very important": "disagree",
            "not at all important": "disagree"}
INT4 = ["very interested", "somewhat interested", "not very interested", "not at all interested"]
INT4_MAP = {"very interested": "agree", "somewhat interested": "agree", "not very interested": "disagree",
            "not at all interested": "disagree"}
REL3 = ["a religious person", "not a religious person", "an atheist"]
REL3_MAP = {"a religious person": "agree", "not a religious person": "disagree", "an atheist": "disagree"}

# (id, domain, instruction, question, labels, map, which latent drives it, sign)
QUESTIONS = [
    ("gender_01", "gender", AGREE_INSTR, "When a mother works for pay, the children suffer.", AGREE4, AGREE4_MAP, "trad", 1),
    ("gender_02", "gender", AGREE_INSTR, "On the whole, men make better political leaders than women do.", AGREE4, AGREE4_MAP, "trad", 1),
    ("gender_03", "gender", AGREE_INSTR, "A university education is more important for a boy than for a girl.", AGREE4, AGREE4_MAP, "trad", 1),
    ("gender_04", "gender", AGREE_INSTR, "On the whole, men make better business executives than women do.", AGREE4, AGREE4_MAP, "trad", 1),
    ("gender_05", "gender", AGREE_INSTR, "Being a housewife is just as fulfilling as working for pay.", AGREE4, AGREE4_MAP, "trad", 1),
    ("gender_06", "gender", AGREE_INSTR, "If a woman earns more money than her husband, it's almost certain to cause problems.", AGREE4, AGREE4_MAP, "trad", 1),
    ("politics_01", "politics", "How interested would you say you are in politics? Are you very interested, somewhat interested, not very interested, or not at all interested?",
     "How interested would you say you are in politics?", INT4, INT4_MAP, "civic", -1),
    ("politics_02", "politics", "For each of the following, indicate how important it is in your life. Would you say it is very important, rather important, not very important, or not at all important?",
     "Politics", IMP4, IMP4_MAP, "civic", -1),
    ("politics_03", "politics", GOOD_INSTR, "Having a strong leader who does not have to bother with parliament and elections.", GOOD4, GOOD4_MAP, "trad", 1),
    ("politics_04", "politics", GOOD_INSTR, "Having the army rule.", GOOD4, GOOD4_MAP, "trad", 1),
    ("politics_05", "politics", GOOD_INSTR, "Having a democratic political system.", GOOD4, GOOD4_MAP, "civic", -1),
    ("religion_01", "religion", "For each of the following, indicate how important it is in your life. Would you say it is very important, rather important, not very important, or not at all important?",
     "Religion", IMP4, IMP4_MAP, "relig", -1),
    ("religion_02", "religion", AGREE_INSTR, "Whenever science and religion conflict, religion is always right.", AGREE4, AGREE4_MAP, "relig", -1),
    ("religion_03", "religion", AGREE_INSTR, "The only acceptable religion is my religion.", AGREE4, AGREE4_MAP, "relig", -1),
    ("religion_04", "religion", "Independently of whether you attend religious services or not, would you say you are a religious person, not a religious person, or an atheist?",
     "Independently of whether you attend religious services or not, would you say you are:", REL3, REL3_MAP, "relig", -1),
    ("religion_05", "religion", AGREE_INSTR, "We depend too much on science and not enough on faith.", AGREE4, AGREE4_MAP, "relig", -1),
]

CATEGORIES = [
    ("Sex", ["Male", "Female"]),
    ("Year of birth", ["1940s", "1950s", "1960s", "1970s", "1980s", "1990s", "2000s"]),
    ("Age", None),
    ("Respondent immigrant", ["I am born in this country", "I am an immigrant to this country (born outside this country)"]),
    ("Mother immigrant", ["Not immigrant", "Immigrant"]),
    ("Father immigrant", ["Not immigrant", "Immigrant"]),
    ("Country of birth: Respondent", ["Western Europe", "Eastern Europe", "East Asia", "South Asia", "North America", "Latin America", "Middle East", "Sub-Saharan Africa"]),
    ("Respondent citizen", ["yes", "no"]),
    ("Number of people in household", ["1", "2", "3", "4", "5", "6 or more"]),
    ("Do you live with your parents", ["Not live with parents", "Live with parents"]),
    ("Marital status", ["Married", "Living together as married", "Divorced", "Separated", "Widowed", "Single"]),
    ("How many children do you have", ["No children", "1 child", "2 children", "3 children", "4 or more children"]),
    ("Highest educational level: Respondent", ["Lower", "Middle", "Higher"]),
    ("Employment status", ["Full time (30 hours a week or more)", "Part time (less than 30 hours a week)", "Self employed", "Retired/pensioned", "Housewife not otherwise employed", "Student", "Unemployed"]),
    ("Employment status - Respondent´s Spouse", ["Full time (30 hours a week or more)", "Part time (less than 30 hours a week)", "Self employed", "Retired/pensioned", "Unemployed", "No spouse"]),
    ("Respondent - Occupational group", ["Professional/Managerial", "Clerical", "Sales", "Service", "Skilled worker", "Semi-skilled worker", "Unskilled worker", "Farm worker"]),
    ("Sector of employment", ["Government or public institution", "Private business or industry", "Private non-profit organization"]),
    ("Are you the chief wage earner in your house", ["Yes", "No"]),
    ("Family savings during past year", ["Save money", "Just get by", "Spent some savings and borrowed money", "Spent savings and borrowed money"]),
    ("Social class", ["Upper class", "Upper middle class", "Lower middle class", "Working class", "Lower class"]),
    ("Income level", ["Low", "Medium", "High"]),
    ("Religious denominations - major groups", ["No religion", "Roman Catholic", "Protestant", "Orthodox", "Muslim", "Hindu", "Buddhist", "Jew", "Other"]),
]

DECADE_AGE = {"1940s": "65 and over", "1950s": "65 and over", "1960s": "50-64", "1970s": "30-49",
              "1980s": "30-49", "1990s": "16-29", "2000s": "16-29"}


def make_profile(rng):
    feats = []
    decade = None
    for cat, values in CATEGORIES:
        if cat == "Age":
            feats.append([cat, DECADE_AGE[decade]])
            continue
        v = rng.choice(values)
        if cat == "Year of birth":
            decade = v
        feats.append([cat, v])
    return feats


def latents(feats, rng):
    d = dict(feats)
    age = ["2000s", "1990s", "1980s", "1970s", "1960s", "1950s", "1940s"].index(d["Year of birth"]) / 6.0
    edu = ["Lower", "Middle", "Higher"].index(d["Highest educational level: Respondent"]) / 2.0
    rel = 0.0 if d["Religious denominations - major groups"] == "No religion" else 1.0
    male = 1.0 if d["Sex"] == "Male" else 0.0
    trad = 0.9 * age - 0.9 * edu + 0.8 * rel + 0.3 * male + rng.gauss(0, 0.6)
    civic = 0.6 * edu + 0.3 * age + rng.gauss(0, 0.6)
    relig = 1.4 * rel + 0.5 * age - 0.4 * edu + rng.gauss(0, 0.6)
    return {"trad": trad, "civic": civic, "relig": relig}


def pick(labels, score, rng):
    # score high -> first (strongest affirmative) label
    k = len(labels)
    z = score + rng.gauss(0, 0.5)
    cuts = [0.3 * (i - (k - 2) / 2.0) * 2.0 for i in range(k - 1)]  # ascending
    idx = sum(1 for c in cuts if z < c)
    return labels[idx if idx < k else k - 1]


def question_record(q):
    qid, domain, instr, text, labels, bmap, _, _ = q
    return {"id": qid, "domain": domain, "instruction": instr, "question": text,
            "labels": labels, "binary_map": bmap}


def synthetic():
    rng = random.Random(20250101)
    respondents, seen = [], set()
    while len(respondents) < 100:
        feats = make_profile(rng)
        key = json.dumps(feats)
        if key in seen:
            continue
        seen.add(key)
        respondents.append({"id": f"R{len(respondents) + 1:03d}", "demographics": feats})
    lats = {r["id"]: latents(r["demographics"], rng) for r in respondents}
    centre = {k: sum(l[k] for l in lats.values()) / len(lats) for k in ("trad", "civic", "relig")}
    gold = []
    for r in respondents:
        lat = lats[r["id"]]
        for q in QUESTIONS:
            score = q[7] * (lat[q[6]] - centre[q[6]])
            gold.append({"respondent_id": r["id"], "question_id": q[0], "label": pick(q[4], score, rng)})
    return {"questions": [question_record(q) for q in QUESTIONS], "respondents": respondents, "gold": gold}


def example_profile():
    feats = [
        ["Sex", "Male"], ["Year of birth", "1940s"], ["Age", "65 and over"],
        ["Respondent immigrant", "I am an immigrant to this country (born outside this country)"],
        ["Mother immigrant", "Immigrant"], ["Father immigrant", "Immigrant"],
        ["Country of birth: Respondent", "East Asia"], ["Respondent citizen", "yes"],
        ["Number of people in household", "1"], ["Do you live with your parents", "Not live with parents"],
        ["Marital status", "Married"], ["How many children do you have", "1 child"],
        ["Highest educational level: Respondent", "Higher"], ["Employment status", "Retired/pensioned"],
        ["Employment status - Respondent´s Spouse", "Full time (30 hours a week or more)"],
        ["Respondent - Occupational group", "Professional/Managerial"],
        ["Sector of employment", "Private business or industry"],
        ["Are you the chief wage earner in your house", "Yes"], ["Family savings during past year", "Save money"],
        ["Social class", "Lower class"], ["Income level", "Low"],
        ["Religious denominations - major groups", "Protestant"],
    ]
    q = question_record(QUESTIONS[0])
    q["labels"] = ["Strongly agree", "Agree", "Disagree", "Strongly disagree"]
    q["binary_map"] = {"Strongly agree": "agree", "Agree": "agree", "Disagree": "disagree", "Strongly disagree": "disagree"}
    return {"questions": [q], "respondents": [{"id": "example-profile", "demographics": feats}],
            "gold": [{"respondent_id": "example-profile", "question_id": q["id"], "label": "disagree"}]}


def mini():
    rng = random.Random(7)
    qs = [question_record(QUESTIONS[0]), question_record(QUESTIONS[11])]
    rs = [{"id": f"m{i}", "demographics": [["Sex", s], ["Year of birth", y], ["Country of birth: Respondent", c]]}
          for i, (s, y, c) in enumerate([("Male", "1950s", "Western Europe"), ("Female", "1980s", "East Asia"),
                                         ("Female", "1960s", "Latin America")], start=1)]
    gold = [{"respondent_id": r["id"], "question_id": q["id"], "label": rng.choice(q["labels"])} for r in rs for q in qs]
    return {"questions": qs, "respondents": rs, "gold": gold}


def dump(name, obj):
    with open(os.path.join(ROOT, name), "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, ensure_ascii=False)
        f.write("\n")


if __name__ == "__main__":
    dump("wvs_synthetic.json", synthetic())
    dump("example_profile.json", example_profile())
    dump("mini.json", mini())
