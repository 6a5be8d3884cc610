"""Writes a synthetic passenger table with the Kaggle Titanic column layout.

The real file is not redistributable here, so this draws 891 passengers
with roughly the familiar marginals (class mix, sex ratio, 342 survivors,
missing ages and cabins). Survival depends on sex, class, age and the
number of siblings/spouses; fare follows class and parch is nearly inert.

    python scripts/make_titanic_surrogate.py crates/core/tests/data/titanic.csv
"""

import sys

import numpy as np

N = 891
SURVIVORS = 342

SURNAMES = [
    "Andersson", "Sage", "Skoog", "Carter", "Goodwin", "Johnson", "Panula", "Rice", "Fortune", "Brown",
    "Smith", "Harris", "Kelly", "Williams", "Baclini", "Asplund", "Ford", "Palsson", "Lefebre", "Becker",
    "Allison", "Hart", "Laroche", "Moor", "Navratil", "Richards", "West", "Taussig", "Hickman", "Boulos",
]
MALE = ["John", "William", "Charles", "George", "James", "Thomas", "Henry", "Edward", "Frederick", "Arthur"]
FEMALE = ["Mary", "Anna", "Elizabeth", "Margaret", "Alice", "Helen", "Ellen", "Emily", "Bertha", "Annie"]


def main(path):
    rng = np.random.default_rng(1912)
    pclass = rng.choice([1, 2, 3], size=N, p=[216 / N, 184 / N, 491 / N])
    male = rng.random(N) < np.where(pclass == 3, 0.71, 0.58)
    age = np.clip(rng.normal(np.select([pclass == 1, pclass == 2], [38.0, 30.0], 25.0), 13.0), 0.42, 80.0)
    age = np.where(age < 1, np.round(age, 2), np.floor(age) + np.where(rng.random(N) < 0.1, 0.5, 0.0))
    sibsp = rng.choice(np.arange(9), size=N, p=[0.68, 0.235, 0.031, 0.018, 0.02, 0.006, 0.0, 0.0, 0.01])
    parch = rng.choice(np.arange(7), size=N, p=[0.76, 0.13, 0.09, 0.006, 0.005, 0.005, 0.004])
    # per-class medians and the three 512.3292 tickets of the real passenger list
    base_fare = np.select([pclass == 1, pclass == 2], [60.3, 14.25], 8.05)
    fare = np.round(base_fare * rng.lognormal(0.0, np.where(pclass == 1, 0.55, 0.4), N), 4)
    fare[rng.random(N) < 0.017] = 0.0
    fare[rng.choice(np.flatnonzero(pclass == 1), size=3, replace=False)] = 512.3292

    logit = (
        2.6 * (~male)
        - 1.1 * (pclass - 1)
        - 0.045 * (age - 30.0)
        + 1.4 * (age < 10)
        - 0.75 * sibsp
        + 0.02 * parch
        + 0.001 * (fare - base_fare)
    )
    noise = rng.logistic(size=N)
    order = np.argsort(-(logit + noise), kind="stable")
    survived = np.zeros(N, dtype=int)
    survived[order[:SURVIVORS]] = 1

    age_missing = rng.random(N) < 177 / N
    cabin = np.where(
        (pclass == 1) & (rng.random(N) < 0.8) | (pclass != 1) & (rng.random(N) < 0.07),
        [f"{'ABCDEFG'[rng.integers(0, 7)]}{rng.integers(1, 130)}" for _ in range(N)],
        "",
    )
    embarked = rng.choice(["S", "C", "Q"], size=N, p=[0.725, 0.188, 0.087]).astype(object)
    embarked[rng.choice(N, size=2, replace=False)] = ""

    with open(path, "w", newline="\n") as f:
        f.write("PassengerId,Survived,Pclass,Name,Sex,Age,SibSp,Parch,Ticket,Fare,Cabin,Embarked\n")
        for i in range(N):
            title, given = ("Mr.", MALE) if male[i] else (("Mrs." if rng.random() < 0.5 else "Miss."), FEMALE)
            if male[i] and age[i] < 13:
                title = "Master."
            name = f'"{SURNAMES[rng.integers(0, len(SURNAMES))]}, {title} {given[rng.integers(0, len(given))]}"'
            ticket = f"{rng.integers(100000, 400000)}"
            age_text = "" if age_missing[i] else f"{age[i]:g}"
            f.write(
                f"{i + 1},{survived[i]},{pclass[i]},{name},{'male' if male[i] else 'female'},{age_text},"
                f"{sibsp[i]},{parch[i]},{ticket},{fare[i]:g},{cabin[i]},{embarked[i]}\n"
            )


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "titanic.csv")
