"""Corrupts the clean survey fixture at known lines; the expectation file is
the oracle for the ingest line-number test."""
import csv

PROFILE_EDITS = {  # file line -> (column, bad value)
    3: ("age", "200"),
    10: ("gender", "Unknown"),
    25: ("occupation", "Astronaut"),
    40: ("income", "Very High"),
    55: ("education", "PhD"),
    70: ("own_a_car", "Maybe"),
    85: ("living_situation", "Boat"),
    100: ("primary_mode_of_transportation", "Teleport"),
}
TRIP_EDITS = {
    5: [("travel_mode", "Hoverboard")],
    50: [("travel_purpose", "Napping")],
    200: [("travel_mode", "Skate"), ("travel_purpose", "Sleeping")],
    640: [("travel_purpose", "Commute")],
    999: [("travel_mode", "Rocket")],
}
# Case changes are not violations.
TRIP_CASE = {777: ("travel_mode", str.lower)}


def rewrite(src, dst, edits, case=None):
    with open(src, newline="") as f:
        rows = list(csv.reader(f))
    header = rows[0]
    expected = []
    for line, change in edits.items():
        row = rows[line - 1]
        for column, value in change if isinstance(change, list) else [change]:
            row[header.index(column)] = value
            expected.append((line, column, value))
    for line, (column, fn) in (case or {}).items():
        row = rows[line - 1]
        row[header.index(column)] = fn(row[header.index(column)])
    with open(dst, "w", newline="") as f:
        csv.writer(f, lineterminator="\n").writerows(rows)
    return expected


def main():
    out = []
    out += [("profiles",) + e for e in rewrite("survey_profiles.csv", "corrupt_profiles.csv", PROFILE_EDITS)]
    out += [("trips",) + e for e in rewrite("survey_trips.csv", "corrupt_trips.csv", TRIP_EDITS, TRIP_CASE)]
    with open("corrupt_expected.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["source", "line", "column", "value"])
        w.writerows(sorted(out))


if __name__ == "__main__":
    main()
