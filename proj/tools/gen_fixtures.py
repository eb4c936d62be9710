#!/usr/bin/env python3
"""Regenerates the scripted fixtures under data/.

Simulator episodes take their scenes from `cmdtriage scene`, so the CLI must
be built first:

    cmake --build build && python3 tools/gen_fixtures.py --cli build/cmdtriage
"""

import argparse
import json
import random
import re
import subprocess
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"

PREFIX = "Considering ambiguity of a goal, "
REASON_CUE = "This code is uncertain because"
QUESTION_CUE = "What can I ask the user? Please "

STOPWORDS = set("""a an the i you he she it we they me him her them my your his its our their is am are
was were be been will would can could should to of in on at for with from by and or but if then that this
these those""".split())

PICK = "robot.pick_and_place(<object>, <place>)"
GIVE = "robot.give(<object>, <person>)"


def content_words(text):
    return [w for w in re.findall(r"[a-z0-9]+", text.lower()) if w not in STOPWORDS]


def call_args(line):
    return [a for call in re.findall(r"\(([^()]*)\)", line) for a in call.split(",")]


def keywords(line):
    return sorted(w for a in call_args(line) for w in content_words(a))


def normalize_goal(text):
    t = text.strip()
    while t and t[-1] in ".?":
        t = t[:-1].strip()
    return t


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Rule builders

def action_rule(goal_line, responses):
    return {"match": f"goal: {PREFIX}{goal_line}\n", "responses": responses}


def uncertain_rules(goal_line, feasible, reason, question=None):
    feas = f"can I {goal_line}?"
    rules = []
    if question is not None:
        rules.append({"match": [QUESTION_CUE, feas], "responses": [question]})
    rules.append({"match": [REASON_CUE, feas], "responses": [reason]})
    answer = "Yes, I can do that with my actions." if feasible else "No, I cannot do that with my actions."
    rules.append({"match": feas, "responses": [answer]})
    return rules


def check_distinct(goal, responses):
    seen = set()
    for r in responses:
        k = tuple(keywords(r))
        if not k:
            raise SystemExit(f"{goal!r}: response without keywords: {r!r}")
        if k in seen:
            raise SystemExit(f"{goal!r}: responses share keywords: {r!r}")
        seen.add(k)


class RuleBook:
    """Collects rules in matching order: questions, reasons, feasibility, actions."""

    def __init__(self):
        self.question, self.reason, self.feas, self.action = [], [], [], []
        self.lines = []

    def clear(self, goal, line):
        self.action.append(action_rule(normalize_goal(goal), [line]))
        self.lines.append(line)

    def uncertain(self, goal, responses, feasible, reason, question=None):
        check_distinct(goal, responses)
        g = normalize_goal(goal)
        self.action.append(action_rule(g, responses))
        rs = uncertain_rules(g, feasible, reason, question if feasible else None)
        for r in rs:
            if QUESTION_CUE in r["match"]:
                self.question.append(r)
            elif REASON_CUE in r["match"]:
                self.reason.append(r)
            else:
                self.feas.append(r)
        self.lines.extend(responses)

    def rules(self):
        return self.question + self.reason + self.feas + self.action


# ---------------------------------------------------------------------------
# Household scenes and the labelled dataset

SCENES = {
    "kitchen": {
        "robot_type": "cooking",
        "objects": ["bacon", "toast", "egg", "pan", "plate", "sink",
                    {"name": "red cup", "color": "red"}, {"name": "blue cup", "color": "blue"}, "coffee"],
        "people": ["Alice"],
        "action_set": [PICK, "robot.cook(<food>)", "robot.serve(<food>, <person>)"],
    },
    "livingroom": {
        "robot_type": "cleaning",
        "objects": ["sponge", "towel", "trash bin", "sofa", "table", "window", "toy", "shelf", "living room"],
        "people": ["child"],
        "action_set": [PICK, "robot.wipe(<surface>)", "robot.vacuum(<area>)"],
    },
    "spa": {
        "robot_type": "massage",
        "objects": ["massage oil", "towel", "bed"],
        "people": ["person in blue shirt", "person in red shirt", "elderly man"],
        "action_set": ["robot.massage(<person>, <body part>)", PICK],
    },
    "service": {
        "robot_type": "service",
        "objects": [{"name": "water bottle", "drink": "yes"}, {"name": "coke can", "drink": "yes"},
                    {"name": "coffee cup", "drink": "yes"}, "apple", "banana", "basket", "table"],
        "people": ["Alice", "Bob"],
        "action_set": [PICK, GIVE],
    },
}

ROBOT_OF_SCENE = {"kitchen": "cook", "livingroom": "clean", "spa": "massage", "service": "other"}

# (goal, skill line) for certain goals; (goal, responses, reason, question) for
# ambiguous; (goal, responses, reason) for infeasible.
HOUSEHOLD = {
    "kitchen": {
        "certain": [
            ("Cook and serve bacon and toast.",
             "robot.cook(bacon); robot.cook(toast); robot.serve(bacon, Alice); robot.serve(toast, Alice)"),
            ("Fry an egg in the pan.", "robot.pick_and_place(egg, pan); robot.cook(egg)"),
            ("Put the toast on the plate.", "robot.pick_and_place(toast, plate)"),
            ("Serve the coffee to Alice.", "robot.serve(coffee, Alice)"),
            ("Put the red cup in the sink.", "robot.pick_and_place(red cup, sink)"),
        ],
        "ambiguous": [
            ("Make something delicious.",
             ["robot.cook(bacon)", "robot.cook(egg)", "robot.cook(toast)", "robot.serve(coffee, Alice)",
              "robot.cook(egg); robot.cook(bacon)"],
             "the goal does not say which dish to make.", "What dish would you like me to make?"),
            ("Bring me a cup.",
             ["robot.serve(red cup, Alice)", "robot.serve(blue cup, Alice)", "robot.pick_and_place(red cup, plate)",
              "robot.pick_and_place(blue cup, plate)", "robot.serve(coffee, Alice)"],
             "there are two cups and the goal does not say which one.", "Which cup do you want, red or blue?"),
            ("Cook breakfast.",
             ["robot.cook(egg)", "robot.cook(bacon); robot.cook(toast)", "robot.cook(toast)",
              "robot.cook(egg); robot.serve(egg, Alice)", "robot.cook(bacon)"],
             "breakfast could mean many different dishes.", "What would you like for breakfast?"),
            ("Serve a drink to the guest.",
             ["robot.serve(coffee, Alice)", "robot.serve(red cup, Alice)", "robot.serve(blue cup, Alice)",
              "robot.pick_and_place(coffee, red cup)", "robot.pick_and_place(coffee, blue cup)"],
             "the goal does not say which drink to serve.", "Which drink should I serve?"),
            ("Put the food away.",
             ["robot.pick_and_place(bacon, plate)", "robot.pick_and_place(toast, plate)",
              "robot.pick_and_place(egg, pan)", "robot.pick_and_place(bacon, sink)",
              "robot.pick_and_place(toast, pan)"],
             "the goal does not say which food or where to put it.", "Which food should I put away, and where?"),
        ],
        "infeasible": [
            ("I want to go for a walk.",
             ["robot.serve(coffee, Alice)", "robot.pick_and_place(plate, sink)", "robot.cook(egg)",
              "robot.pick_and_place(red cup, plate)", "robot.serve(toast, Alice)"],
             "walking with a person is not among the cooking actions."),
            ("Fix the broken window.",
             ["robot.pick_and_place(pan, sink)", "robot.cook(bacon)", "robot.pick_and_place(plate, pan)",
              "robot.serve(coffee, Alice)", "robot.pick_and_place(blue cup, sink)"],
             "repairing a window needs tools and actions a cooking robot does not have."),
            ("Give me a haircut.",
             ["robot.serve(toast, Alice)", "robot.pick_and_place(egg, plate)", "robot.cook(toast)",
              "robot.pick_and_place(blue cup, plate)", "robot.serve(bacon, Alice)"],
             "cutting hair is outside the cooking actions."),
            ("Drive me to the airport.",
             ["robot.serve(coffee, Alice)", "robot.pick_and_place(toast, pan)", "robot.cook(bacon)",
              "robot.pick_and_place(egg, sink)", "robot.serve(egg, Alice)"],
             "driving is not one of the available actions."),
            ("Paint the kitchen wall.",
             ["robot.pick_and_place(pan, plate)", "robot.cook(egg)", "robot.serve(coffee, Alice)",
              "robot.pick_and_place(red cup, sink)", "robot.cook(toast)"],
             "painting is not one of the available actions."),
        ],
    },
    "livingroom": {
        "certain": [
            ("Clean the living room.", "robot.vacuum(living room)"),
            ("Wipe the table.", "robot.wipe(table)"),
            ("Put the toy in the trash bin.", "robot.pick_and_place(toy, trash bin)"),
            ("Vacuum under the sofa.", "robot.vacuum(sofa)"),
            ("Wipe the window with the sponge.", "robot.pick_and_place(sponge, window); robot.wipe(window)"),
        ],
        "ambiguous": [
            ("Clean the living room and wipe all surfaces",
             ["robot.wipe(table)", "robot.wipe(window)", "robot.wipe(shelf)", "robot.vacuum(living room)",
              "robot.wipe(table); robot.wipe(shelf)"],
             "the goal does not list which surfaces to wipe.", "Which surfaces should I wipe?"),
            ("Tidy up a little.",
             ["robot.pick_and_place(toy, shelf)", "robot.pick_and_place(towel, shelf)",
              "robot.vacuum(living room)", "robot.pick_and_place(toy, trash bin)", "robot.wipe(table)"],
             "tidying up could mean several different chores.", "What should I tidy up first?"),
            ("Put that away.",
             ["robot.pick_and_place(toy, shelf)", "robot.pick_and_place(sponge, shelf)",
              "robot.pick_and_place(towel, shelf)", "robot.pick_and_place(toy, trash bin)",
              "robot.pick_and_place(sponge, trash bin)"],
             "the goal does not say which object 'that' is.", "Which object should I put away?"),
            ("Wipe it down.",
             ["robot.wipe(table)", "robot.wipe(window)", "robot.wipe(shelf)", "robot.wipe(sofa)",
              "robot.wipe(table); robot.wipe(window)"],
             "the goal does not say what to wipe.", "What should I wipe down?"),
            ("Clean the mess over there.",
             ["robot.vacuum(living room)", "robot.vacuum(sofa)", "robot.wipe(table)",
              "robot.pick_and_place(toy, trash bin)", "robot.wipe(window)"],
             "the location of the mess is unclear.", "Where is the mess you want me to clean?"),
        ],
        "infeasible": [
            ("play with the person in the living room",
             ["robot.pick_and_place(toy, sofa)", "robot.vacuum(living room)", "robot.wipe(table)",
              "robot.pick_and_place(towel, sofa)", "robot.wipe(shelf)"],
             "playing with a person is not one of the cleaning actions."),
            ("Cook dinner.",
             ["robot.wipe(table)", "robot.vacuum(living room)", "robot.pick_and_place(sponge, table)",
              "robot.wipe(window)", "robot.pick_and_place(towel, table)"],
             "cooking is outside the cleaning actions."),
            ("Walk the dog.",
             ["robot.vacuum(living room)", "robot.pick_and_place(toy, sofa)", "robot.wipe(sofa)",
              "robot.pick_and_place(sponge, sofa)", "robot.pick_and_place(towel, shelf)"],
             "walking a dog is not one of the available actions."),
            ("Repair the roof.",
             ["robot.wipe(window)", "robot.pick_and_place(sponge, shelf)", "robot.vacuum(sofa)",
              "robot.wipe(shelf)", "robot.pick_and_place(toy, table)"],
             "roof repairs need tools and actions a cleaning robot does not have."),
            ("Wash the car.",
             ["robot.wipe(table)", "robot.pick_and_place(sponge, window)", "robot.vacuum(living room)",
              "robot.wipe(sofa)", "robot.pick_and_place(towel, trash bin)"],
             "there is no car here and washing it is not among the actions."),
        ],
    },
    "spa": {
        "certain": [
            ("Give a massage to the person wearing blue shirt", "robot.massage(person in blue shirt, back)"),
            ("Massage the shoulders of the elderly man.", "robot.massage(elderly man, shoulders)"),
            ("Put the towel on the bed.", "robot.pick_and_place(towel, bed)"),
            ("Give the person in red shirt a foot massage.", "robot.massage(person in red shirt, feet)"),
            ("Bring the massage oil to the bed.", "robot.pick_and_place(massage oil, bed)"),
        ],
        "ambiguous": [
            ("Someone in the house needs a relaxing massage.",
             ["robot.massage(person in blue shirt, back)", "robot.massage(person in red shirt, back)",
              "robot.massage(elderly man, back)", "robot.massage(person in blue shirt, shoulders)",
              "robot.massage(elderly man, neck)"],
             "the goal does not say who needs the massage.", "Who would like the massage?"),
            ("Massage him.",
             ["robot.massage(elderly man, back)", "robot.massage(elderly man, shoulders)",
              "robot.massage(person in blue shirt, back)", "robot.massage(person in red shirt, neck)",
              "robot.massage(elderly man, feet)"],
             "it is unclear which person 'him' refers to.", "Which person do you mean?"),
            ("Give a massage where it hurts.",
             ["robot.massage(person in blue shirt, back)", "robot.massage(person in blue shirt, neck)",
              "robot.massage(elderly man, shoulders)", "robot.massage(person in red shirt, feet)",
              "robot.massage(elderly man, back)"],
             "the goal does not say who is hurting or where.", "Who is in pain, and where does it hurt?"),
            ("Help her relax.",
             ["robot.massage(person in red shirt, shoulders)", "robot.massage(person in blue shirt, shoulders)",
              "robot.pick_and_place(towel, bed)", "robot.massage(person in red shirt, back)",
              "robot.pick_and_place(massage oil, bed)"],
             "it is unclear who 'her' is and how to help.", "Who should I help relax?"),
            ("Massage the person over there.",
             ["robot.massage(person in red shirt, back)", "robot.massage(person in blue shirt, back)",
              "robot.massage(elderly man, back)", "robot.massage(person in red shirt, neck)",
              "robot.massage(person in blue shirt, feet)"],
             "several people could be meant.", "Which person should I massage?"),
        ],
        "infeasible": [
            ("Make a coffee",
             ["robot.pick_and_place(massage oil, bed)", "robot.massage(elderly man, back)",
              "robot.pick_and_place(towel, bed)", "robot.massage(person in blue shirt, neck)",
              "robot.pick_and_place(towel, massage oil)"],
             "making coffee is outside the massage actions."),
            ("Cut my hair.",
             ["robot.massage(person in red shirt, neck)", "robot.pick_and_place(towel, bed)",
              "robot.massage(elderly man, shoulders)", "robot.pick_and_place(massage oil, towel)",
              "robot.massage(person in blue shirt, back)"],
             "cutting hair is not one of the available actions."),
            ("Cook lunch.",
             ["robot.pick_and_place(towel, bed)", "robot.massage(person in red shirt, back)",
              "robot.pick_and_place(massage oil, bed)", "robot.massage(elderly man, feet)",
              "robot.massage(person in blue shirt, shoulders)"],
             "cooking is outside the massage actions."),
            ("Clean the bathroom.",
             ["robot.pick_and_place(towel, bed)", "robot.pick_and_place(massage oil, bed)",
              "robot.massage(elderly man, neck)", "robot.pick_and_place(towel, massage oil)",
              "robot.massage(person in red shirt, feet)"],
             "cleaning is not one of the available actions."),
            ("Play the piano.",
             ["robot.massage(person in blue shirt, feet)", "robot.pick_and_place(massage oil, towel)",
              "robot.massage(elderly man, back)", "robot.pick_and_place(towel, bed)",
              "robot.massage(person in red shirt, shoulders)"],
             "playing music is not one of the available actions."),
        ],
    },
    "service": {
        "certain": [
            ("Give the coke can to Alice.", "robot.give(coke can, Alice)"),
            ("Put the banana on the table.", "robot.pick_and_place(banana, table)"),
            ("Give the water bottle to Bob.", "robot.give(water bottle, Bob)"),
            ("Put the apple in the basket.", "robot.pick_and_place(apple, basket)"),
            ("Give the coffee cup to Alice.", "robot.give(coffee cup, Alice)"),
        ],
        "ambiguous": [
            ("Give the coke can to someone.",
             ["robot.give(coke can, Alice)", "robot.give(coke can, Bob)", "robot.pick_and_place(coke can, table)",
              "robot.pick_and_place(coke can, basket)", "robot.give(coke can, Alice); robot.give(coke can, Bob)"],
             "the goal does not say who should receive it.", "Who should I give the coke can to?"),
            ("Give something to drink to Bob.",
             ["robot.give(water bottle, Bob)", "robot.give(coke can, Bob)", "robot.give(coffee cup, Bob)",
              "robot.give(water bottle, Bob); robot.give(coke can, Bob)", "robot.give(apple, Bob)"],
             "there are several drinks and the goal does not say which.", "Which drink would Bob like?"),
            ("Give something to drink to someone.",
             ["robot.give(water bottle, Alice)", "robot.give(coke can, Bob)", "robot.give(coffee cup, Alice)",
              "robot.give(water bottle, Bob)", "robot.give(coke can, Alice)"],
             "neither the drink nor the person is specified.", "Which drink, and who should get it?"),
            ("Bring me a snack.",
             ["robot.give(apple, Alice)", "robot.give(banana, Alice)", "robot.give(apple, Bob)",
              "robot.give(banana, Bob)", "robot.pick_and_place(apple, table)"],
             "the goal does not say which snack or who is asking.", "Which snack would you like?"),
            ("Hand that over.",
             ["robot.give(apple, Alice)", "robot.give(coke can, Alice)", "robot.give(water bottle, Bob)",
              "robot.give(banana, Bob)", "robot.give(coffee cup, Alice)"],
             "it is unclear which object 'that' is.", "Which object do you mean?"),
        ],
        "infeasible": [
            ("Wipe the desk.",
             ["robot.pick_and_place(banana, table)", "robot.give(apple, Alice)",
              "robot.pick_and_place(coke can, basket)", "robot.give(water bottle, Bob)",
              "robot.pick_and_place(apple, basket)"],
             "there is no wiping action available."),
            ("Smash the apple.",
             ["robot.pick_and_place(apple, table)", "robot.give(apple, Bob)", "robot.pick_and_place(apple, basket)",
              "robot.give(apple, Alice)", "robot.pick_and_place(banana, table)"],
             "smashing objects is not one of the available actions."),
            ("Put the banana on the ground.",
             ["robot.pick_and_place(banana, table)", "robot.pick_and_place(banana, basket)",
              "robot.give(banana, Alice)", "robot.give(banana, Bob)", "robot.pick_and_place(apple, table)"],
             "the ground is not a place the robot can reach."),
            ("Open the window.",
             ["robot.give(water bottle, Alice)", "robot.pick_and_place(coffee cup, table)",
              "robot.give(coke can, Bob)", "robot.pick_and_place(banana, basket)", "robot.give(apple, Bob)"],
             "opening windows is not one of the available actions."),
            ("Sing a song.",
             ["robot.give(coffee cup, Bob)", "robot.pick_and_place(water bottle, basket)",
              "robot.give(banana, Alice)", "robot.pick_and_place(coke can, table)", "robot.give(apple, Alice)"],
             "singing is not one of the available actions."),
        ],
    },
}

# Goals of the three-way fixture, lowercased the way the task templates phrase them.
THREE_WAY = {
    "certain": [
        ("give the coke can to Alice", "robot.give(coke can, Alice)"),
        ("give the water bottle to Bob", "robot.give(water bottle, Bob)"),
        ("give the apple to Alice", "robot.give(apple, Alice)"),
        ("give the banana to Bob", "robot.give(banana, Bob)"),
        ("give the coffee cup to Alice", "robot.give(coffee cup, Alice)"),
        ("give the apple to Bob", "robot.give(apple, Bob)"),
    ],
    "ambiguous": [
        ("give the coke can to someone",
         ["robot.give(coke can, Alice)", "robot.give(coke can, Bob)", "robot.pick_and_place(coke can, table)",
          "robot.pick_and_place(coke can, basket)", "robot.give(coke can, Alice); robot.give(coke can, Bob)"],
         "the goal does not say who should receive the coke can.", "Who should I give the coke can to?"),
        ("give the apple to someone",
         ["robot.give(apple, Alice)", "robot.give(apple, Bob)", "robot.pick_and_place(apple, basket)",
          "robot.pick_and_place(apple, table)", "robot.give(apple, Alice); robot.give(apple, Bob)"],
         "the goal does not say who should receive the apple.", "Who should I give the apple to?"),
        ("give the banana to someone",
         ["robot.give(banana, Bob)", "robot.give(banana, Alice)", "robot.pick_and_place(banana, table)",
          "robot.pick_and_place(banana, basket)", "robot.give(banana, Alice); robot.give(banana, Bob)"],
         "the goal does not say who should receive the banana.", "Who should I give the banana to?"),
        ("give something to drink to Alice",
         ["robot.give(water bottle, Alice)", "robot.give(coke can, Alice)", "robot.give(coffee cup, Alice)",
          "robot.give(water bottle, Alice); robot.give(coffee cup, Alice)", "robot.give(apple, Alice)"],
         "there are several drinks and the goal does not say which.", "Which drink would Alice like?"),
        ("give something to drink to Bob",
         ["robot.give(coke can, Bob)", "robot.give(water bottle, Bob)", "robot.give(coffee cup, Bob)",
          "robot.give(water bottle, Bob); robot.give(coke can, Bob)", "robot.give(banana, Bob)"],
         "there are several drinks and the goal does not say which.", "Which drink would Bob like?"),
        ("give something to drink to someone",
         ["robot.give(water bottle, Alice)", "robot.give(coke can, Bob)", "robot.give(coffee cup, Alice)",
          "robot.give(water bottle, Bob)", "robot.give(coke can, Alice)"],
         "neither the drink nor the person is specified.", "Which drink, and who should get it?"),
    ],
    "infeasible": [
        ("wipe the desk",
         ["robot.pick_and_place(banana, table)", "robot.give(apple, Alice)", "robot.pick_and_place(coke can, basket)",
          "robot.give(water bottle, Bob)", "robot.pick_and_place(apple, basket)"],
         "there is no wiping action available."),
        ("smash the apple",
         ["robot.pick_and_place(apple, table)", "robot.give(apple, Bob)", "robot.pick_and_place(apple, basket)",
          "robot.give(apple, Alice)", "robot.pick_and_place(banana, table)"],
         "smashing objects is not one of the available actions."),
        ("smash the coke can",
         ["robot.pick_and_place(coke can, table)", "robot.give(coke can, Bob)",
          "robot.pick_and_place(coke can, basket)", "robot.give(coke can, Alice)", "robot.give(apple, Bob)"],
         "smashing objects is not one of the available actions."),
        ("smash the coffee cup",
         ["robot.pick_and_place(coffee cup, table)", "robot.give(coffee cup, Bob)",
          "robot.pick_and_place(coffee cup, basket)", "robot.give(coffee cup, Alice)", "robot.give(banana, Bob)"],
         "smashing objects is not one of the available actions."),
        ("put the banana on the ground",
         ["robot.pick_and_place(banana, table)", "robot.pick_and_place(banana, basket)", "robot.give(banana, Alice)",
          "robot.give(banana, Bob)", "robot.pick_and_place(apple, table)"],
         "the ground is not a place the robot can reach."),
        ("put the water bottle on the ground",
         ["robot.pick_and_place(water bottle, table)", "robot.pick_and_place(water bottle, basket)",
          "robot.give(water bottle, Alice)", "robot.give(water bottle, Bob)", "robot.give(coke can, Bob)"],
         "the ground is not a place the robot can reach."),
    ],
}

# Second-round resolution used by the session and interactive fixtures.
THREE_WAY_RESOLVED = [
    ("give the coke can to someone, given that: Alice", "robot.give(coke can, Alice)"),
    ("give the coke can to someone, given that: Bob", "robot.give(coke can, Bob)"),
]

CONTEXTS = [
    {"scene_snippet": "objects = [red block, blue bowl]; people = []",
     "goal_text": "put the red block in the blue bowl", "skill_text": "robot.pick_and_place(red block, blue bowl)"},
    {"scene_snippet": "objects = [egg, pan]; people = [Alice]",
     "goal_text": "fry the egg", "skill_text": "robot.pick_and_place(egg, pan); robot.cook(egg)"},
    {"scene_snippet": "objects = [table, sponge]; people = []",
     "goal_text": "wipe the table", "skill_text": "robot.wipe(table)"},
    {"scene_snippet": "objects = [coke can]; people = [Bob]",
     "goal_text": "hand the coke can to Bob", "skill_text": "robot.give(coke can, Bob)"},
    {"scene_snippet": "objects = [towel, bed]; people = [elderly man]",
     "goal_text": "massage the back of the elderly man", "skill_text": "robot.massage(elderly man, back)"},
    {"scene_snippet": "objects = [green block, yellow block]; people = []",
     "goal_text": "stack the green block on the yellow block",
     "skill_text": "robot.pick_and_place(green block, yellow block)"},
    {"scene_snippet": "objects = [toast, plate]; people = [Alice]",
     "goal_text": "serve toast to Alice", "skill_text": "robot.cook(toast); robot.serve(toast, Alice)"},
    {"scene_snippet": "objects = [purple block]; people = []",
     "goal_text": "move the purple block to the top right corner",
     "skill_text": "robot.pick_and_place(purple block, top right corner)"},
]


def sagc_rows():
    rows = []
    for scene_id, groups in HOUSEHOLD.items():
        for label in ("certain", "ambiguous", "infeasible"):
            for item in groups[label]:
                rows.append({"goal_text": item[0], "robot_type": ROBOT_OF_SCENE[scene_id],
                             "scene": SCENES[scene_id], "label": label, "scene_id": scene_id})
    return rows


def household_rules():
    book = RuleBook()
    for groups in HOUSEHOLD.values():
        for goal, line in groups["certain"]:
            book.clear(goal, line)
        for goal, responses, reason, question in groups["ambiguous"]:
            book.uncertain(goal, responses, True, reason, question)
        for goal, responses, reason in groups["infeasible"]:
            book.uncertain(goal, responses, False, reason)
    return book


def three_way_rules():
    book = RuleBook()
    for goal, line in THREE_WAY["certain"] + THREE_WAY_RESOLVED:
        book.clear(goal, line)
    for goal, responses, reason, question in THREE_WAY["ambiguous"]:
        book.uncertain(goal, responses, True, reason, question)
    for goal, responses, reason in THREE_WAY["infeasible"]:
        book.uncertain(goal, responses, False, reason)
    return book


def three_way_rows():
    rows = []
    for label in ("certain", "ambiguous", "infeasible"):
        for item in THREE_WAY[label]:
            rows.append({"goal_text": item[0], "robot_type": "other", "scene": SCENES["service"],
                         "label": label, "scene_id": "service"})
    return rows


# ---------------------------------------------------------------------------
# Simulator episodes

CORNERS = ["top left corner", "top right corner", "bottom left corner", "bottom right corner"]

QUESTIONS = {
    "pick_user_block": "Which block should I pick?",
    "place_user_bowl": "Which bowl should I put it on?",
    "pick_block_put_bowl": "Which block and which bowl do you mean?",
    "stack_all": "Which corner should I stack the blocks on?",
    "give_to_someone": "Who should I give it to?",
    "give_drink_to": "Which drink would they like?",
    "give_drink_to_someone": "Which drink, and who should get it?",
}

HIDDEN_SLOTS = {
    "pick_user_block": ["block"], "place_user_bowl": ["bowl"], "pick_block_put_bowl": ["block", "bowl"],
    "stack_all": ["corner"], "give_to_someone": ["person"], "give_drink_to": ["item"],
    "give_drink_to_someone": ["item", "person"],
}

INFEASIBLE_REASONS = {
    "wipe_desk": "there is no wiping action available.",
    "smash": "smashing objects is not one of the available actions.",
    "put_on_ground": "the ground is not a place the robot can reach.",
}


def pp(src, dst):
    return f"robot.pick_and_place({src}, {dst})"


def give(item, person):
    return f"robot.give({item}, {person})"


def names(scene, suffix):
    return [o["name"] for o in scene["objects"] if isinstance(o, dict) and o["name"].endswith(suffix)]


def items(scene, drinks_only=False):
    out = []
    for o in scene["objects"]:
        if isinstance(o, dict) and (o["name"].endswith(" block") or o["name"].endswith(" bowl")):
            continue
        name = o if isinstance(o, str) else o["name"]
        if name in CORNERS:
            continue
        if drinks_only and not (isinstance(o, dict) and o.get("drink") == "yes"):
            continue
        out.append(name)
    return out


def resolved_line(template, slots, scene):
    blocks = names(scene, " block")
    if template in ("pick_place", "pick_user_block", "place_user_bowl", "pick_block_put_bowl"):
        return pp(slots["block"], slots["bowl"])
    if template == "all_on_corner":
        return "; ".join(pp(b, slots["corner"]) for b in blocks)
    if template == "all_in_bowl":
        return "; ".join(pp(b, slots["bowl"]) for b in blocks)
    if template == "different_corners":
        return "; ".join(pp(b, c) for b, c in zip(blocks, CORNERS))
    if template == "matching_color":
        return "; ".join(pp(b, b.replace(" block", " bowl")) for b in blocks)
    if template == "mismatching_color":
        bowls = [b.replace(" block", " bowl") for b in blocks]
        return "; ".join(pp(b, bowls[(i + 1) % len(bowls)]) for i, b in enumerate(blocks))
    if template in ("stack_on_corner", "stack_all"):
        calls = [pp(blocks[0], slots["corner"])]
        calls += [pp(blocks[i], blocks[i - 1]) for i in range(1, len(blocks))]
        return "; ".join(calls)
    if template.startswith("give"):
        return give(slots["item"], slots["person"])
    raise SystemExit(f"no resolution for {template}")


def hidden_options(template, slot, scene):
    if slot == "block":
        return names(scene, " block")
    if slot == "bowl":
        return names(scene, " bowl")
    if slot == "corner":
        return CORNERS
    if slot == "person":
        return scene["people"]
    if slot == "item":
        return items(scene, drinks_only="drink" in template)
    raise SystemExit(slot)


def reveal(slot, value):
    return value if slot == "person" else "the " + value


def guesses(template, bindings, hidden, scene):
    """Five keyword-distinct first-round lines; the first one misses the intent."""
    import itertools
    slots = HIDDEN_SLOTS[template]
    pools = [hidden_options(template, s, scene) for s in slots]
    correct = resolved_line(template, {**bindings, **hidden}, scene)
    lines = []
    for combo in itertools.product(*pools):
        line = resolved_line(template, {**bindings, **dict(zip(slots, combo))}, scene)
        if line != correct:
            lines.append(line)
    lines.append(correct)
    # widen thin pools with two-call variants
    base = list(lines)
    for a, b in itertools.combinations(base, 2):
        lines.append(f"{a}; {b}")
    if template.startswith("give"):
        lines += [give(i, p) for i in items(scene) for p in scene["people"]]
    out, seen = [], set()
    for line in lines:
        k = tuple(keywords(line))
        if k not in seen:
            seen.add(k)
            out.append(line)
        if len(out) == 5:
            break
    if out and out[0] == correct:
        out.append(out.pop(0))
    if len(out) < 5 or out[0] == correct:
        raise SystemExit(f"cannot build guesses for {template}")
    return out


def scene_of(cli, template, seed):
    raw = subprocess.run([cli, "scene", template, "--scene-seed", str(seed)], check=True, capture_output=True,
                         text=True).stdout
    return json.loads(raw)


def simulator_fixtures(cli, entries, book):
    batch = []
    for template, seed in entries:
        info = scene_of(cli, template, seed)
        scene, goal, bindings, hidden = info["scene"], info["goal"], info["bindings"], info["hidden_intent"]
        entry = {"template_id": template, "seed": seed, "budget": 1, "bindings": bindings}
        if hidden:
            entry["hidden_intent"] = hidden
            slots = HIDDEN_SLOTS[template]
            answer = " and ".join(reveal(s, hidden[s]) for s in slots)
            book.uncertain(goal, guesses(template, bindings, hidden, scene), True,
                           "the goal leaves part of the task to the user.", QUESTIONS[template])
            book.clear(f"{goal}, given that: {answer}", resolved_line(template, {**bindings, **hidden}, scene))
        elif template in INFEASIBLE_REASONS:
            pool = items(scene)
            responses = [pp(pool[0], pool[1]), give(pool[0], scene["people"][0]), pp(pool[1], pool[2]),
                         give(pool[2], scene["people"][-1]), pp(pool[3], pool[0])]
            book.uncertain(goal, responses, False, INFEASIBLE_REASONS[template])
        else:
            book.clear(goal, resolved_line(template, bindings, scene))
        batch.append(entry)
        if template == "stack_all":
            write_json(DATA / "scenes" / "tabletop.json", scene)
    return batch


SIM_MAIN = [("pick_place", 1), ("all_on_corner", 2), ("all_in_bowl", 3), ("different_corners", 4),
            ("matching_color", 5), ("stack_on_corner", 6),
            ("pick_user_block", 7), ("place_user_bowl", 8), ("pick_block_put_bowl", 9), ("stack_all", 10),
            ("give_to_someone", 11), ("give_drink_to", 12)]
SIM_REALWORLD = [("give_to", 21), ("give_drink_to_someone", 22), ("wipe_desk", 23), ("smash", 24),
                 ("put_on_ground", 25), ("mismatching_color", 26)]


# ---------------------------------------------------------------------------
# Embeddings

def embedding_table(lines, dim=8, seed=20240):
    vocab = []
    for line in lines:
        for w in keywords(line):
            if w not in vocab:
                vocab.append(w)
    rng = random.Random(seed)
    rows = [f"{len(vocab)} {dim}"]
    for w in vocab:
        rows.append(w + " " + " ".join(f"{rng.gauss(0.0, 1.0):.4f}" for _ in range(dim)))
    return "\n".join(rows) + "\n", len(vocab)


def config(rules, dataset=None, epsilon=0.05):
    paths = {"embedding_table": "../embeddings/fixture.vec", "context_set": "../contexts/contexts.json"}
    if dataset:
        paths["dataset"] = dataset
    return {
        "backend": {"kind": "mock", "rules_path": rules, "seed": 7},
        "triage": {"epsilon": epsilon, "h": 5, "k": 3, "estimator": "context_sampling", "max_question_rounds": 1,
                   "seed": 42, "sample_temperature": 0.7, "zero_shot_temperature": 0.0, "max_tokens": 64,
                   "uncertainty_aware": True},
        "paths": paths,
    }


SAGC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Labelled robot goal record (one per line)",
    "type": "object",
    "required": ["goal_text", "robot_type", "scene", "label", "scene_id"],
    "properties": {
        "goal_text": {"type": "string", "minLength": 1},
        "robot_type": {"enum": ["cook", "clean", "massage", "other"]},
        "label": {"enum": ["certain", "ambiguous", "infeasible"]},
        "scene_id": {"type": "string"},
        "scene": {
            "type": "object",
            "required": ["action_set"],
            "properties": {
                "robot_type": {"type": "string"},
                "objects": {"type": "array", "items": {"$ref": "#/$defs/entity"}},
                "people": {"type": "array", "items": {"$ref": "#/$defs/entity"}},
                "action_set": {"type": "array", "minItems": 1, "items": {"type": "string"}},
            },
        },
    },
    "$defs": {
        "entity": {
            "oneOf": [
                {"type": "string", "minLength": 1},
                {"type": "object", "required": ["name"], "properties": {"name": {"type": "string"}}},
            ]
        }
    },
}


def write_ndjson(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cli", default=str(ROOT / "build" / "cmdtriage"), help="built cmdtriage binary")
    args = ap.parse_args()

    rows = sagc_rows()
    write_ndjson(DATA / "sagc" / "sagc_fixture.ndjson", rows)
    by_label = {l: [r for r in rows if r["label"] == l] for l in ("certain", "ambiguous", "infeasible")}
    separation = by_label["certain"][::2] + by_label["ambiguous"][::4] + by_label["infeasible"][::4]
    assert len(separation) == 20, len(separation)
    assert sum(r["label"] == "certain" for r in separation) == 10
    write_ndjson(DATA / "sagc" / "separation20.ndjson", separation)
    write_ndjson(DATA / "sagc" / "three_way18.ndjson", three_way_rows())
    write_json(DATA / "sagc" / "record.schema.json", SAGC_SCHEMA)

    for name, scene in SCENES.items():
        write_json(DATA / "scenes" / f"{name}.json", scene)
    write_json(DATA / "contexts" / "contexts.json", CONTEXTS)

    household = household_rules()
    write_json(DATA / "mock" / "household_rules.json", household.rules())
    three = three_way_rules()
    write_json(DATA / "mock" / "three_way_rules.json", three.rules())

    sim = RuleBook()
    main_batch = simulator_fixtures(args.cli, SIM_MAIN, sim)
    real_batch = simulator_fixtures(args.cli, SIM_REALWORLD, sim)
    write_json(DATA / "batches" / "tabletop12.json", {"episodes": main_batch})
    write_json(DATA / "batches" / "realworld.json", {"episodes": real_batch})
    write_json(DATA / "mock" / "tabletop_rules.json", sim.rules())

    all_lines = household.lines + three.lines + sim.lines + [c["skill_text"] for c in CONTEXTS]
    table, n = embedding_table(all_lines)
    (DATA / "embeddings").mkdir(parents=True, exist_ok=True)
    (DATA / "embeddings" / "fixture.vec").write_text(table)

    write_json(DATA / "configs" / "household.json",
               config("../mock/household_rules.json", "../sagc/sagc_fixture.ndjson"))
    write_json(DATA / "configs" / "three_way.json",
               config("../mock/three_way_rules.json", "../sagc/three_way18.ndjson"))
    write_json(DATA / "configs" / "tabletop.json", config("../mock/tabletop_rules.json"))
    print(f"wrote fixtures: {len(rows)} dataset rows, {n} embedding words")


if __name__ == "__main__":
    main()
