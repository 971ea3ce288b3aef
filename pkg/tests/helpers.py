"""Small on-disk scenario used by the simulation and CLI tests."""

from pathlib import Path

FEEDER = """\
[bases]
s_base=3490
[slack]
bus=s voltage=1.0
[buses]
id=s kv=2.4
id=a kv=2.4
id=b kv=2.4
[lines]
from=s to=a r=0.3 x=0.6
from=a to=b r=2.0 x=3.0
[loads]
bus=a p=300 q=100
bus=b p=200 q=80
[capacitors]
bus=b q=300
"""


def profiles_text(start="11:00", end="13:00", ghi=900.0, load=0.8, ramp=False):
    h0, m0 = map(int, start.split(":"))
    h1, m1 = map(int, end.split(":"))
    rows = ["time,ghi,load_mult"]
    t0, t1 = h0 * 60 + m0, h1 * 60 + m1
    for k, minute in enumerate(range(t0, t1 + 1)):
        g = ghi * (0.5 + 0.5 * k / max(t1 - t0, 1)) if ramp else ghi
        rows.append(f"{minute // 60:02d}:{minute % 60:02d},{g},{load}")
    return "\n".join(rows) + "\n"


def write_scenario(
    root: Path,
    *,
    topology="a=A b=B",
    methods="noctl,fc,ac-nocm,ac-fw,ac-dw",
    window=("12:00", "12:10"),
    profiles=None,
    max_iter=100,
    name="small.scn",
) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    (root / "feeder.txt").write_text(FEEDER)
    (root / "prof.csv").write_text(profiles if profiles is not None else profiles_text(ramp=True))
    topo = f"[topology]\n{topology}\n" if topology else ""
    text = (
        "[files]\nfeeder=feeder.txt profiles=prof.csv\n"
        "[agents]\nid=A bus=a rating=400 dc=480\nid=B bus=b rating=100 dc=120\n"
        f"{topo}"
        f"[simulation]\nstart={window[0]} end={window[1]} step=10 control=20 beta=50 "
        f"max_iter={max_iter} methods={methods}\n"
    )
    path = root / name
    path.write_text(text)
    return path
