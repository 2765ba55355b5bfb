#!/usr/bin/env python3
"""Regenerates the checked-in fixture files under data/.

Run from the repository root:  python3 tools/fixtures/make_fixtures.py

Output is deterministic; re-running produces byte-identical files.
"""

import hashlib
import json
import os
import random
import unicodedata

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
DATA = os.path.join(ROOT, "data")

GYN = "gyn_oncology_discipline"
MORPH = "carcinosarcoma_or_sarcomatoid_morphology"


def dump_line(obj):
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_lines(path, rows):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(dump_line(r) + "\n")


def marker(name, detail, observed=None):
    m = {"name": name, "detail": detail}
    if observed:
        m["observed"] = observed
    return m


def twin(id_, source, ref, n, age, gender, race, diagnosis, pdl1, tmb, tmb_class, mmr, others,
         previous, treatment, line, response, pfs, os_, similarity, main_rec=None):
    return {
        "id": id_,
        "source": source,
        "source_ref": ref,
        "n": n,
        "age": age,
        "gender": gender,
        "race": race,
        "diagnosis": diagnosis,
        "biomarkers": {
            "pd-l1": pdl1,
            "tmb/mb": tmb,
            "tmb class": tmb_class,
            "msi/mss": mmr,
            "others": others,
        },
        "previous treatments": previous,
        "study treatment": treatment,
        "treatment line": line,
        "study treatment response": {"treatment response": response, "adverse effects": None},
        "PFS": pfs,
        "OS": os_,
        "main recommendation": main_rec,
        "similarity": similarity,
        "adjudication": "confirmed",
    }


def institutional_twins():
    inst = "Institutional"
    return [
        twin("case-1", "institutional", inst, None, "77", "female", "White", "UCS",
             "CPS: 41, TPS: 3%, IC: 40%", "6.3", "intermediate", "pMMR (3.6%)",
             [marker("HER2", "positive", "2021-01"), marker("ER", "80%"), marker("PR", "3%"),
              marker("ESR1", "amplification 7%"),
              marker("CA-125", "elevated at progression 2021, normalized since 2022")],
             None, "Radiotherapy + pembrolizumab (off-label)", 3, "PR",
             ">30 (ongoing)", ">132 (ongoing)", [GYN, MORPH]),
        twin("case-2", "institutional", inst, None, "37", "female", "White", "CESC",
             "CPS: 75, TPS: 70%, IC: 5%", "0", "low", "pMMR (1.11%)", [],
             None, "Pembrolizumab (off-label)", 3, "PR", ">49 (ongoing)", ">79 (ongoing)", [GYN]),
        twin("case-3", "institutional", inst, None, "32", "female", "White", "CESC",
             "CPS: 40, TPS: 40%, IC : <1%", "3.1", "low", "pMMR (0%)",
             [marker("PIK3CA", "p.E545K, 0.26"), marker("CHEK2", "p.T367Mfs*15, 0.79")],
             None, "Pembrolizumab (off-label)", 2, "PD", "1", "15 (deceased)", [GYN]),
        twin("case-4", "institutional", inst, None, "85", "female", "White", "CESC",
             "CPS: 81, TPS: 80%, IC: 1%", "11", "intermediate", "pMMR (4.6%)",
             [marker("BRAF", "p.D594N, 0.27"), marker("KMT2C", "p.Q192Tfs*28, 0.29")],
             None, "Pembrolizumab (off-label)", 4, "PR, PD", "18", "72 (deceased)", [GYN]),
        twin("case-5", "institutional", inst, None, "37", "female", "White", "CEAD",
             "CPS: 95, TPS: 90%, IC: 5%", "5.5", "intermediate", "pMMR (4.6%)", [],
             None, "Ipilimumab/ nivolumab, nivolumab maintenance (off-label)", 2, "CR",
             ">45", ">45 (ongoing)", [GYN]),
        twin("case-6", "institutional", inst, None, "61", "female", "White", "USC",
             "CPS: 40, TPS: 30%, IC: 8%", "13.4", "intermediate", "pMMR (1.89%)",
             [marker("PIK3CA", "p.E545K, 0.06"), marker("PTEN", "p.K128Rfs*6, 0.13"),
              marker("PTEN", "p.Y240delins*, 0.06"), marker("FRα", "0%"),
              marker("HER2", "Score 0"), marker("Trop2", "100%")],
             None, "Pembrolizumab + lenvatinib (in-label)", 3, "PD", "3", ">69 (ongoing)", [GYN]),
        twin("case-7", "institutional", inst, None, "60", "male", "White",
             "Undifferentiated Sarcomatoid Carcinoma of the Pancreas",
             "CPS: 85, TPS: 80%, IC: 4%", "3.2", "low", "pMMR (2.61%)",
             [marker("KRAS", "p.G12C, 0.38")],
             None, "Pembrolizumab (off-label)", 3, "PR, PD", "6", "19 (deceased)", [MORPH]),
    ]


def literature_twins():
    lit = "literature"
    both = [GYN, MORPH]
    rows = [
        twin("case-8", lit, "PMID: 32620662", 1, "65", None, "Asian (Japanese)", "UCS",
             "positive", "n/a", None, "dMMR/MSI-H", [], None, "Radiotherapy + pembrolizumab", 2,
             "CR, PD", "10", "16 (deceased)", both),
    ]
    kohn = [  # one publication, seven individually reported patients
        ("case-9", "negative", "pMMR", 3, "PD", "3.3", "9.9 (deceased)"),
        ("case-10", "negative", "pMMR", 3, "PD", "0.9", "2.8 (deceased)"),
        ("case-11", "positive", "dMMR/MSI-H", 3, "PD", "1.6", "2.4 (deceased)"),
        ("case-12", "negative", "pMMR", 3, "PD", "2.6", "2.8 (deceased)"),
        ("case-13", "negative", "pMMR", 5, "PD", "1.9", "2.1 (deceased)"),
        ("case-14", "negative", "pMMR", 4, "SD", "- (ongoing)", "4.4 (alive at data cut-off)"),
        ("case-15", "negative", "pMMR", 3, "SD, PD", "11.2", "12.6 (alive at data cut-off)"),
    ]
    for id_, pdl1, mmr, line, resp, pfs, os_ in kohn:
        rows.append(twin(id_, lit, "PMID: 34401435", 7, "n/a", None, "n/a", "UCS", pdl1, "n/a",
                         None, mmr, [], None, "Pembrolizumab + lenvatinib", line, resp, pfs, os_,
                         both))
    rows += [
        twin("case-16", lit, "PMID: 29386312", 1, "55", None, "n/a", "UCS", "1+, low positive",
             "169", None, "pMMR", [marker("POLE", "mutated")], None, "Pembrolizumab", 4, "PR",
             ">12 (ongoing)", "39 (alive at data cut-off)", both),
        twin("case-17", lit, "PMID: 38881561", 1, "68", None, "n/a", "UCS", "n/a", "6", None,
             "pMMR",
             [marker("PTEN", "K128T"), marker("ESR1", "amplified (8/8 exons, est. 11 copies)"),
              marker("ER", "positive")],
             None, "Pembrolizumab + lenvatinib + letrozole", 2, "PR", ">36 (ongoing)",
             "45 (alive at data cut-off)", both),
        twin("case-18", lit, "PMID: 30442730", 1, "59", None, "n/a", "UCS", "n/a", "n/a", None,
             "n/a", [], None, "Pembrolizumab", 2, "MR", "4", "n/a", both),
        twin("case-19", lit, "PMID: 33004543", 1, "66", None, "Asian (Japanese)", "UCS", "n/a",
             "n/a", None, "dMMR",
             [marker("HLA", "highly predisposing haplotype for narcolepsy")], None,
             "Pembrolizumab", 3, "PD", "2", "Deceased, 72 days post pembrolizumab, OS n/a", both),
        twin("case-20", lit, "PMID: 31149529", 1, "68", None, "n/a", "UCS", "n/a", "n/a", None,
             "n/a", [], None, "PD-1 antibody + CTLA-4 antibody", 2, "PR", ">5 (ongoing)",
             "N/a, alive", both),
        twin("case-21", lit, "PMID: 35434237", 1, "62", None, "n/a", "UCS", "n/a", "14", None,
             "pMMR",
             [marker("NBN", "germline mutation (c.2117C>G, p.Ser706Ter)"),
              marker("HER2", "low (Score 1+)")],
             None, "Avelumab + axetinib", 3, "PR", ">15 (ongoing)", "48 (alive at data cut-off)",
             both),
    ]
    return rows


def add_previous_treatments(rows):
    # Only case 1 documents its earlier lines in detail.
    rows[0]["previous treatments"] = [
        {"line": 1, "description": "Carboplatin + paclitaxel (adjuvant)", "response": None},
        {"line": 2, "description": "Carboplatin + paclitaxel (recurrence)", "response": None},
    ]


def synthetic_candidates():
    return [
        twin("cand-s1", "institutional", "Institutional", None, "58", "female", "White",
             "High-grade serous ovarian carcinoma", "CPS: 50, TPS: 20%, IC: 10%", "4", "low",
             "pMMR (2.0%)", [], None, "Carboplatin + pegylated liposomal doxorubicin", 2, "SD",
             "5", ">20 (ongoing)", [GYN]),
        twin("cand-s2", "institutional", "Institutional", None, "71", "female", "White",
             "Endometrioid endometrial carcinoma", "CPS: 60, TPS: 40%, IC: 10%", "8",
             "intermediate", "pMMR (1.5%)", [], None, "Letrozole", 3, "SD", "7", "26 (deceased)",
             [GYN]),
    ]


def knowledge_base():
    def entry(biomarker, condition, kind, action, level, response, reference, region=None,
              trial=None, recruiting=None, note=None):
        e = {
            "biomarker": biomarker,
            "condition": condition,
            "action_kind": kind,
            "action": action,
            "evidence_level": level,
            "expected_response": response,
            "region": region,
            "trial_id": trial,
            "recruiting": recruiting,
            "reference": reference,
        }
        if note:
            e["note"] = note
        return e

    return [
        entry("HER2", "positive", "treatment", "Trastuzumab deruxtecan", "phase_2",
              "STATICE (recurrent UCS, 22 HER2-high / 10 HER2-low): ORR 54.5% / 70%; "
              "median PFS 6.2 / 13.3 months; median OS 6.7 months / not reached.",
              "Nishikawa 2023, phase II"),
        entry("HER2", "positive", "treatment", "Trastuzumab emtansine (T-DM1)", "preclinical",
              "Antitumor activity and prolonged survival versus trastuzumab in "
              "HER2-overexpressing carcinosarcoma xenografts.",
              "Nicoletti 2015, preclinical"),
        entry("ER", "positive", "treatment", "Antihormonal treatment (e.g., anastrozole)",
              "phase_2",
              "PARAGON (7 UCS): clinical benefit rate 43% at 3 months, median duration of "
              "benefit 5.6 months, no objective responses, median PFS 2.7 months.",
              "Edmondson 2021, phase II"),
        entry("ESR1", "positive", "treatment", "Pembrolizumab + lenvatinib + letrozole",
              "case_report",
              "pMMR ESR1-amplified metastatic UCS: durable partial response of 36 months in "
              "third line.",
              "Soiffer 2024, case report"),
        entry("FRα", "not_determined", "confirmatory_test",
              "Test FRα expression; if positive consider mirvetuximab soravtansine + "
              "pembrolizumab", "phase_2",
              "Phase II NCT03835819 includes pMMR patients after pembrolizumab failure; interim "
              "endometrial ORR 37.5%; no UCS-stratified analysis.",
              "Porter 2024, phase II", region="United States", trial="NCT03835819",
              recruiting=False),
        entry("HRD", "not_determined", "confirmatory_test",
              "Test homologous recombination deficiency; if present consider a PARP inhibitor",
              "preclinical",
              "HRD-signature UCS cell lines more sensitive to olaparib in vitro and in vivo.",
              "Tymon-Rosario 2022, preclinical"),
        entry("MAGE-A4", "not_determined", "trial_referral",
              "Bispecific TCER targeting MAGE-A4/8 (IMA401)", "phase_1",
              "Phase Ia/Ib first-in-human trial in recurrent or refractory solid tumors; "
              "target expression screened at enrollment.",
              "https://clinicaltrials.gov/study/NCT05359445", region="Bavaria",
              trial="NCT05359445", recruiting=True),
        entry("PRAME", "not_determined", "trial_referral",
              "Bispecific TCER targeting PRAME (IMA402-101)", "phase_1",
              "Phase I/II first-in-human trial in recurrent or refractory solid tumors.",
              "https://clinicaltrials.gov/study/NCT05958121", region="Bavaria",
              trial="NCT05958121", recruiting=True),
        entry("PRAME", "not_determined", "trial_referral",
              "Autologous TCR-engineered T cells against PRAME, alone or with nivolumab "
              "(IMA203-101)", "phase_1",
              "Phase 1 trial in recurrent or refractory solid tumors.",
              "https://clinicaltrials.gov/study/NCT03686124", region="Bavaria",
              trial="NCT03686124", recruiting=True),
        entry("Trop2", "not_determined", "confirmatory_test",
              "Test Trop2 expression; if positive consider sacituzumab govitecan", "phase_2",
              "Phase II in Trop2-positive recurrent endometrial cancer (3 UCS): ORR 35%, "
              "median PFS 5.7 months, median OS 22.5 months.",
              "Santin 2023, phase II",
              note="Preclinical support: growth inhibition in Trop2-positive carcinosarcoma "
                   "lines (Lopez 2020)."),
        entry("CA-125", "elevated", "monitoring", "Treatment monitoring with serum CA-125",
              "retrospective",
              "Elevated CA-125 correlates with extrauterine disease and is an independent "
              "adverse prognostic factor after surgery in UCS.",
              "Huang 2007, retrospective"),
    ]


TABLE1 = """source,attribute,observations,tp,tn,fp,fn,accuracy,precision,recall,f1
EHR,Age,7,6,0,1,0,0.86,0.86,1.00,0.86
EHR,Gender,7,7,0,0,0,1.00,1.00,1.00,1.00
EHR,Race,7,7,0,0,0,1.00,1.00,1.00,1.00
EHR,Diagnosis,7,7,0,0,0,1.00,1.00,1.00,1.00
EHR,Biomarkers,7,4,0,0,3,0.57,1.00,0.57,0.73
EHR,Previous treatments,7,2,0,0,5,0.29,1.00,1.00,1.00
EHR,Study treatments,7,7,0,0,0,1.00,1.00,1.00,1.00
EHR,Study treatment response,7,5,0,1,1,0.71,0.83,1.00,0.91
EHR,PFS [months],7,1,0,0,6,0.14,1.00,0.14,0.25
EHR,OS [months],7,7,0,0,0,1.00,1.00,1.00,1.00
EHR,TOTAL,70,53,0,2,15,0.76,0.96,0.85,0.91
Literature,Sample size,32,29,3,0,0,1.00,1.00,1.00,1.00
Literature,Age,32,29,3,0,0,1.00,1.00,1.00,1.00
Literature,Gender,32,7,25,0,0,1.00,1.00,1.00,1.00
Literature,Race,32,7,25,0,0,1.00,1.00,1.00,1.00
Literature,Diagnosis,32,30,1,0,1,0.97,1.00,0.97,0.98
Literature,Biomarkers,32,17,15,0,0,1.00,1.00,1.00,1.00
Literature,Previous treatments,32,23,9,0,0,1.00,1.00,1.00,1.00
Literature,Study treatments,32,29,2,0,1,0.97,1.00,0.97,0.98
Literature,Study treatment response,32,26,5,0,1,0.97,1.00,0.96,0.98
Literature,PFS [months],32,10,19,0,3,0.91,1.00,0.77,0.87
Literature,OS [months],32,18,13,0,1,0.97,1.00,0.95,0.97
Literature,TOTAL,352,225,120,0,7,0.98,1.00,0.97,0.98
"""


def adjudications():
    sample_values = {
        "Sample size": ("1", "7"),
        "Age": ("65", "55-68"),
        "Gender": ("female", "female"),
        "Race": ("White", "Asian (Japanese)"),
        "Diagnosis": ("UCS", "uterine carcinosarcoma"),
        "Biomarkers": ("pMMR", "CPS: 41"),
        "Previous treatments": ("carboplatin + paclitaxel", "doxorubicin"),
        "Study treatments": ("Pembrolizumab", "Pembrolizumab + lenvatinib"),
        "Study treatment response": ("PR", "SD, PD"),
        "PFS [months]": ("4", ">12 (ongoing)"),
        "OS [months]": ("9.9 (deceased)", "48"),
    }
    rows_by_source = {"EHR": [], "Literature": []}
    for line in TABLE1.strip().splitlines()[1:]:
        src, attr, obs, tp, tn, fp, fn = line.split(",")[:7]
        if attr == "TOTAL":
            continue
        rows_by_source[src].append((attr, int(obs), int(tp), int(tn), int(fp), int(fn)))

    out = {}
    for src, rows in rows_by_source.items():
        records = []
        prefix = "case" if src == "EHR" else "pub"
        for attr, obs, tp, tn, fp, fn in rows:
            verdicts = ["tp"] * tp + ["tn"] * tn + ["fp"] * fp + ["fn"] * fn
            assert len(verdicts) == obs
            a, b = sample_values.get(attr, ("value", "other value"))
            for i, v in enumerate(verdicts):
                subject = f"{prefix}-{i + 1}" if src == "EHR" else f"{prefix}-{i + 1:03d}"
                if v == "tp":
                    extracted, gold = (a, a) if i % 2 == 0 else (b, b)
                elif v == "tn":
                    extracted, gold = None, None
                elif v == "fp":
                    extracted, gold = a, None
                else:
                    extracted, gold = (None, a) if i % 2 == 0 else (b, a)
                records.append({
                    "source": src.lower(),
                    "subject": subject,
                    "attribute": attr,
                    "extracted": extracted,
                    "gold": gold,
                    "verdict": v,
                    "reviewer": "reviewer-1" if i % 2 == 0 else "reviewer-2",
                    "note": "",
                })
        out[src] = records
    return out


def literature_manifest():
    # 663 publications: median 7 pages / 27,995 chars, longest 934,513 chars.
    rng = random.Random(20240701)
    n = 663
    half = n // 2
    chars = sorted(rng.randint(3000, 27994) for _ in range(half))
    chars += [27995]
    chars += sorted(rng.randint(27996, 400000) for _ in range(half - 1)) + [934513]
    pages = sorted(rng.randint(1, 6) for _ in range(half)) + [7] + \
        sorted(rng.randint(8, 40) for _ in range(half - 1)) + [250]
    order = list(range(n))
    rng.shuffle(order)
    rows = []
    for k, i in enumerate(order):
        doc_id = hashlib.sha256(f"literature-{k}".encode()).hexdigest()
        rows.append({"doc_id": doc_id, "origin": "literature", "media": "pdf",
                     "pages": pages[i], "chars": chars[i],
                     "path": f"literature/pub-{k + 1:04d}.pdf"})
    return rows


def ehr_manifest():
    # 89 EHR documents over 7 patients: 9-21 per patient, median 11.
    counts = {"case-1": 21, "case-2": 11, "case-3": 9, "case-4": 12, "case-5": 10,
              "case-6": 15, "case-7": 11}
    rng = random.Random(89)
    rows = []
    k = 0
    for patient, c in counts.items():
        for j in range(c):
            k += 1
            doc_id = hashlib.sha256(f"ehr-{k}".encode()).hexdigest()
            rows.append({"doc_id": doc_id, "origin": "ehr", "media": "image",
                         "pages": 0, "chars": 0, "path": f"ehr/{patient}/doc-{j + 1:02d}.png",
                         "patient_hint": patient})
    # Pages and chars: median 2 pages / 4,340 chars over the 89 documents.
    pages = sorted(rng.randint(1, 2) for _ in range(44)) + [2] + \
        sorted(rng.randint(2, 9) for _ in range(44))
    chars = sorted(rng.randint(600, 4339) for _ in range(44)) + [4340] + \
        sorted(rng.randint(4341, 30000) for _ in range(44))
    perm = list(range(89))
    rng.shuffle(perm)
    for r, i in zip(rows, perm):
        r["pages"] = pages[i]
        r["chars"] = chars[i]
    return rows


def content_hash(text):
    normalized = unicodedata.normalize("NFC", text.replace("\r\n", "\n"))
    return hashlib.sha256(normalized.encode("utf-8")).hexdigest()


def mock_corpus():
    """Ten synthetic EHR subjects with canned model replies keyed by content hash."""
    base = os.path.join(DATA, "mock_corpus")
    docs_dir = os.path.join(base, "documents")
    replies_dir = os.path.join(base, "replies")
    os.makedirs(docs_dir, exist_ok=True)
    os.makedirs(replies_dir, exist_ok=True)
    for d in (docs_dir, replies_dir):
        for f in os.listdir(d):
            os.remove(os.path.join(d, f))

    diagnoses = ["UCS", "CESC", "USC", "CEAD", "UCS", "CESC", "Ovarian carcinosarcoma",
                 "UCS", "CESC", "UCS"]
    manifest = []
    truth = []
    for s in range(1, 11):
        subject = f"subj-{s:02d}"
        age = str(40 + 3 * s)
        cps = 35 + 6 * s
        tmb = round(1.5 * s, 1)
        line = 2 + s % 3
        pfs = f">{5 * s} (ongoing)" if s % 4 == 0 else str(2 * s)
        os_ = f"{6 * s} (deceased)" if s % 3 == 0 else f">{6 * s} (ongoing)"
        response = ["PR", "PD", "SD", "CR", "PR, PD"][s % 5]
        treatment = "Pembrolizumab" if s % 2 else "Pembrolizumab + lenvatinib"
        note1 = (
            f"Tumorboard note for patient {subject}.\n"
            f"Age: {age} years. Gender: female. Race: White.\n"
            f"Diagnosis: {diagnoses[s - 1]}.\n"
            f"PD-L1 CPS: {cps}, TPS: {s * 5}%, IC: {s}%. TMB {tmb} Mut/Mb. MMR: pMMR.\n"
            f"Previous treatments: carboplatin + paclitaxel.\n"
            f"Current line {line}: {treatment}.\n"
        )
        note2 = (
            f"Follow-up note for patient {subject}.\n"
            f"Response to {treatment}: {response}.\n"
            f"PFS {pfs} months; OS {os_} months.\n"
        )
        gold = {
            "age": age,
            "gender": "female",
            "race": "White",
            "diagnosis": diagnoses[s - 1],
            "biomarkers": {"pd-l1": f"CPS: {cps}, TPS: {s * 5}%, IC: {s}%",
                           "tmb/mb": str(tmb), "msi/mss": "pMMR", "others": None},
            "previous treatments": "carboplatin + paclitaxel",
            "study treatment": treatment,
            "study treatment response": {"treatment response": response,
                                         "adverse effects": None},
            "PFS": pfs,
            "OS": os_,
        }
        first = {k: v for k, v in gold.items()
                 if k not in ("study treatment response", "PFS", "OS")}
        first.update({"study treatment response": None, "PFS": None, "OS": None})
        second = {k: None for k in gold}
        second.update({"study treatment": treatment,
                       "study treatment response": gold["study treatment response"],
                       "PFS": pfs, "OS": os_, "diagnosis": diagnoses[s - 1]})
        docs = [note1, note2] if s % 2 == 0 else [note1 + note2]
        payloads = [first, second] if s % 2 == 0 else [gold]
        for k, (text, payload) in enumerate(zip(docs, payloads)):
            name = f"{subject}-doc{k + 1}.txt"
            with open(os.path.join(docs_dir, name), "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
            h = content_hash(text)
            output = json.dumps(payload, ensure_ascii=False)
            if s == 3:
                output = "```json\n" + output + "\n```"
            if s == 5:
                output = output[:-1] + ",}"
            if s == 10:
                output = "I cannot help with that request."
            with open(os.path.join(replies_dir, h + ".json"), "w", encoding="utf-8",
                      newline="\n") as f:
                f.write(dump_line({"output": output}) + "\n")
            manifest.append({"doc_id": h, "origin": "ehr", "media": "text",
                             "pages": 1, "chars": len(text),
                             "path": f"documents/{name}", "patient_hint": subject})
        if s != 10:
            truth.append({"subject": subject, "attributes": gold})
    write_lines(os.path.join(base, "manifest.jsonl"), manifest)
    write_lines(os.path.join(base, "ground_truth.jsonl"), truth)


def main():
    inst = institutional_twins()
    add_previous_treatments(inst)
    lit = literature_twins()
    write_lines(os.path.join(DATA, "fixtures", "twins.jsonl"), inst + lit)
    write_lines(os.path.join(DATA, "fixtures", "funnel_candidates.jsonl"),
                inst + synthetic_candidates())
    write_lines(os.path.join(DATA, "kb", "default_kb.jsonl"), knowledge_base())
    with open(os.path.join(DATA, "reference", "extraction_metrics_table.csv"), "w",
              encoding="utf-8", newline="\n") as f:
        f.write(TABLE1)
    adj = adjudications()
    write_lines(os.path.join(DATA, "fixtures", "adjudications_ehr.jsonl"), adj["EHR"])
    write_lines(os.path.join(DATA, "fixtures", "adjudications_literature.jsonl"),
                adj["Literature"])
    write_lines(os.path.join(DATA, "fixtures", "literature_manifest.jsonl"),
                literature_manifest())
    write_lines(os.path.join(DATA, "fixtures", "ehr_manifest.jsonl"), ehr_manifest())
    mock_corpus()


if __name__ == "__main__":
    main()
