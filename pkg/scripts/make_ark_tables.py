"""Regenerate the bundled additive Runge-Kutta comparator tables.

Coefficients are the Kennedy-Carpenter ARK4(3)6L[2]SA and ARK5(4)8L[2]SA
pairs, entered as exact rationals (the ARK5 entries follow PETSc's
arkimex.c transcription).  Exact row sums are checked against the stated
abscissae before anything is written, then every number is emitted as a
17-significant-digit decimal string so a later read round-trips binary64
exactly.

Run from the repository root:  python scripts/make_ark_tables.py
"""

from fractions import Fraction as F
from pathlib import Path
import json

OUT = Path(__file__).resolve().parent.parent / "src" / "imexglm" / "data"


def fmt(x: F) -> str:
    return format(float(x), ".17g")


def emit(name, c, A_explicit, b_explicit, A_implicit, b_implicit, fname):
    sigma = len(c)

    def pad(rows):
        full = []
        for i in range(sigma):
            row = list(rows[i]) if i < len(rows) else []
            row = row + [F(0)] * (sigma - len(row))
            full.append(row)
        return full

    Ae, Ai = pad(A_explicit), pad(A_implicit)
    for label, A in (("explicit", Ae), ("implicit", Ai)):
        for i in range(sigma):
            gap = sum(A[i]) - c[i]
            assert abs(float(gap)) < 1e-15, (name, label, i, float(gap))

    doc = {
        "name": name,
        "sigma": sigma,
        "c": [fmt(x) for x in c],
        "A_explicit": [[fmt(x) for x in row] for row in Ae],
        "b_explicit": [fmt(x) for x in b_explicit],
        "A_implicit": [[fmt(x) for x in row] for row in Ai],
        "b_implicit": [fmt(x) for x in b_implicit],
    }
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / fname, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    print(f"wrote {OUT / fname}")


# ARK4(3)6L[2]SA: 6 stages, ESDIRK diagonal 1/4, shared weights b.
g4 = F(1, 4)
ark4_c = [F(0), F(1, 2), F(83, 250), F(31, 50), F(17, 20), F(1)]
ark4_Ae = [
    [],
    [F(1, 2)],
    [F(13861, 62500), F(6889, 62500)],
    [F(-116923316275, 2393684061468), F(-2731218467317, 15368042101831),
     F(9408046702089, 11113171139209)],
    [F(-451086348788, 2902428689909), F(-2682348792572, 7519795681897),
     F(12662868775082, 11960479115383), F(3355817975965, 11060851509271)],
    [F(647845179188, 3216320057751), F(73281519250, 8382639484533),
     F(552539513391, 3454668386233), F(3354512671639, 8306763924573), F(4040, 17871)],
]
ark4_Ai = [
    [],
    [g4, g4],
    [F(8611, 62500), F(-1743, 31250), g4],
    [F(5012029, 34652500), F(-654441, 2922500), F(174375, 388108), g4],
    [F(15267082809, 155376265600), F(-71443401, 120774400), F(730878875, 902184768),
     F(2285395, 8070912), g4],
    [F(82889, 524892), F(0), F(15625, 83664), F(69875, 102672), F(-2260, 8211), g4],
]
ark4_b = [F(82889, 524892), F(0), F(15625, 83664), F(69875, 102672), F(-2260, 8211), g4]
emit("ARK4(3)6L[2]SA", ark4_c, ark4_Ae, ark4_b, ark4_Ai, ark4_b, "ark436.json")

# ARK5(4)8L[2]SA: 8 stages, ESDIRK diagonal 41/200, shared weights b.
g5 = F(41, 200)
ark5_c = [F(0), F(41, 100), F(2935347310677, 11292855782101), F(1426016391358, 7196633302097),
          F(92, 100), F(24, 100), F(3, 5), F(1)]
ark5_Ae = [
    [],
    [F(41, 100)],
    [F(367902744464, 2072280473677), F(677623207551, 8224143866563)],
    [F(1268023523408, 10340822734521), F(0), F(1029933939417, 13636558850479)],
    [F(14463281900351, 6315353703477), F(0), F(66114435211212, 5879490589093),
     F(-54053170152839, 4284798021562)],
    [F(14090043504691, 34967701212078), F(0), F(15191511035443, 11219624916014),
     F(-18461159152457, 12425892160975), F(-281667163811, 9011619295870)],
    [F(19230459214898, 13134317526959), F(0), F(21275331358303, 2942455364971),
     F(-38145345988419, 4862620318723), F(-1, 8), F(-1, 8)],
    [F(-19977161125411, 11928030595625), F(0), F(-40795976796054, 6384907823539),
     F(177454434618887, 12078138498510), F(782672205425, 8267701900261),
     F(-69563011059811, 9646580694205), F(7356628210526, 4942186776405)],
]
ark5_Ai = [
    [],
    [g5, g5],
    [F(41, 400), F(-567603406766, 11931857230679), g5],
    [F(683785636431, 9252920307686), F(0), F(-110385047103, 1367015193373), g5],
    [F(3016520224154, 10081342136671), F(0), F(30586259806659, 12414158314087),
     F(-22760509404356, 11113319521817), g5],
    [F(218866479029, 1489978393911), F(0), F(638256894668, 5436446318841),
     F(-1179710474555, 5321154724896), F(-60928119172, 8023461067671), g5],
    [F(1020004230633, 5715676835656), F(0), F(25762820946817, 25263940353407),
     F(-2161375909145, 9755907335909), F(-211217309593, 5846859502534),
     F(-4269925059573, 7827059040749), g5],
    [F(-872700587467, 9133579230613), F(0), F(0), F(22348218063261, 9555858737531),
     F(-1143369518992, 8141816002931), F(-39379526789629, 19018526304540),
     F(32727382324388, 42900044865799), g5],
]
ark5_b = [F(-975461918565, 9796059967033), F(0), F(0), F(78070527104295, 32432590147079),
          F(-548382580838, 3424219808633), F(-33438840321285, 15594753105479),
          F(3629800801594, 4656183773603), F(4035322873751, 18575991585200)]
emit("ARK5(4)8L[2]SA", ark5_c, ark5_Ae, ark5_b, ark5_Ai, ark5_b, "ark548.json")
