"""
Replaying the designated short-sale list
========================================

The list is only published as dated counts (added, deleted, on list).
Expand them into anonymous stock-level events, replay, and check the
running count against the published one.
"""

import numpy as np

from shortskew.events import TABLE1_ROWS, assign_groups, events_from_counts, replay_events

events = events_from_counts(TABLE1_ROWS)
tl = replay_events(events)

print(f"{'date':<12}{'added':>7}{'deleted':>9}{'on list':>9}")
for (d, a, x, c), row in zip(tl.summary_rows(), TABLE1_ROWS):
    flag = "" if c == row[3] else "  <-- mismatch"
    print(f"{str(d):<12}{a:>7}{x:>9}{c:>9}{flag}")
print(f"{'total':<12}{tl.added.sum():>7}{tl.deleted.sum():>9}{tl.counts[-1]:>9}")

# deletes remove the longest-standing members, so the first 90 names are
# the ones that leave during 2010-2013
leavers = sorted({e.stock_id for e in events if e.action == "delete"})
print("first leavers:", leavers[:5])

# group 1 = ever on the list by the as-of date
groups = assign_groups(tl, tl.stocks, "2014-03-31")
print("group 1 size:", sum(g == 1 for g in groups.values()))

# the list size on a few dates
for d in ("2010-03-30", "2010-03-31", "2012-01-01", "2013-03-27", "2014-03-31"):
    print(d, tl.count_on(np.datetime64(d)))
