"""Regenerate src/gqm_tsm/data/demo_evidence.ndjson (500 records, 2013-04..2013-06).

Run from the repository root. Output is deterministic; the committed file is
the fixture that tests and goldens are pinned to.
"""

import json
import random
from datetime import datetime, timedelta, timezone
from pathlib import Path

LOCAL = timezone(timedelta(hours=8))
MONTHS = [(2013, 4), (2013, 5), (2013, 6)]
TOTAL = 500

COUNTS = {
    "incident": [12, 9, 7],
    "audit_log_review": [4, 6, 8],
    "assessment": [1, 2, 2],
    "corrective_action": [5, 6, 8],
    "maintenance": [2, 3, 4],
    "personnel": [40, 40, 40],
    "training": [6, 10, 14],
    "password_audit": [24, 24, 24],
    "access_control": [6, 7, 8],
    "survey_response": [24, 24, 24],
}
TRAINED = [0, 1, 2]
CA_SUCCESS = [3, 5, 8]
NETSEC = [3, 5, 6]
MANUAL_OK = [9, 10, 12]
SCANNER_OK = [8, 10, 11]
CRACKABLE = [5, 3, 2]
SHARED = [3, 1, 0]
METHODS = [
    ["network_segment", "ip_address", "firewall"],
    ["network_segment", "ip_address", "firewall", "mac_address"],
    ["network_segment", "ip_address", "firewall", "mac_address", "vpn"],
]
UNDERSTOOD = {"job_description": [8, 10, 11], "job_function": [7, 9, 11]}
UPDATE_FAIL = [5, 3, 1]


def attributes(kind, i, m, rng):
    if kind == "incident":
        return {"severity": rng.choice(["low", "medium", "high"]), "source": rng.choice(["ids", "ips", "user_report"])}
    if kind in ("audit_log_review", "maintenance"):
        return {}
    if kind == "assessment":
        return {"assessor_trained": "true" if i < TRAINED[m] else "false"}
    if kind == "corrective_action":
        return {"status": "success" if i < CA_SUCCESS[m] else "failure"}
    if kind == "security_update":
        target = rng.choice(["firewall", "ids", "core_switch", "wlan_controller", "vpn_gateway"])
        return {"result": "failure" if i < UPDATE_FAIL[m] else "success", "target": target}
    if kind == "personnel":
        role = "network_security" if i < NETSEC[m] else rng.choice(["developer", "helpdesk", "finance", "sales"])
        return {"role": role}
    if kind == "training":
        course = rng.choice(["iso27001_awareness", "firewall_admin", "incident_handling"])
        return {"course": course, "attendee": f"staff{(i * 3 + m) % 17:02d}"}
    if kind == "password_audit":
        manual = i < 12
        j = i % 12
        ok = j < (MANUAL_OK[m] if manual else SCANNER_OK[m])
        crackable = j < ((CRACKABLE[m] + 1) // 2 if manual else CRACKABLE[m] // 2)
        hours = rng.choice([0.5, 1, 2, 3.5]) if crackable else rng.choice([12, 48, 96.25, 240])
        return {
            "policy_compliant": "true" if ok else "false",
            "crack_time_hours": hours,
            "shared": "true" if i < SHARED[m] else "false",
            "source": "manual" if manual else "scanner",
        }
    if kind == "access_control":
        return {"method": METHODS[m][i % len(METHODS[m])]}
    if kind == "survey_response":
        subject = "job_description" if i < 12 else "job_function"
        return {"understood": "true" if i % 12 < UNDERSTOOD[subject][m] else "false", "subject": subject}
    raise KeyError(kind)


def main():
    rng = random.Random(2013)
    fixed = sum(sum(v) for v in COUNTS.values())
    extra = TOTAL - fixed
    updates = [extra // 3 + (1 if m < extra % 3 else 0) for m in range(3)]
    out = []
    seq = 0
    for m, (year, month) in enumerate(MONTHS):
        batch = [(k, i) for k, v in COUNTS.items() for i in range(v[m])]
        batch += [("security_update", i) for i in range(updates[m])]
        stamped = []
        for kind, i in batch:
            day = rng.randint(1, 28)
            if kind == "maintenance" and m == 1 and i == 0:
                # 02:30 local on 1 May is still 30 April in UTC
                local = datetime(year, month, 1, 2, 30, tzinfo=LOCAL)
            else:
                local = datetime(year, month, day, rng.randint(8, 18), rng.choice([0, 15, 30, 45]), tzinfo=LOCAL)
            stamped.append((local, kind, attributes(kind, i, m, rng)))
        stamped.sort(key=lambda t: (t[0], t[1]))
        for local, kind, attrs in stamped:
            seq += 1
            if seq % 7 == 0:
                ts = local.isoformat()
            else:
                ts = local.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
            rid = f"EV-{year}{month:02d}-{seq:04d}"
            out.append({"record_id": rid, "kind": kind, "timestamp": ts, "attributes": attrs})
    assert len(out) == TOTAL, len(out)
    path = Path("src/gqm_tsm/data/demo_evidence.ndjson")
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in out:
            fh.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main()
