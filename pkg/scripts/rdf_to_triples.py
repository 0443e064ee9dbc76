"""Convert an RDF knowledge base into the triples TSV layout read by
``edgnn.data.load_triples_task``.

Needs ``rdflib`` (not a dependency of the package itself)::

    pip install rdflib
    python scripts/rdf_to_triples.py mutag.owl data/mutag_node \
        --drop http://dl-learner.org/carcinogenesis#isMutagenic \
        --train MUTAG_train.tsv --test MUTAG_test.tsv

URIs are written verbatim, literals in N3 form so that a literal can never
collide with a URI. The relation that carries the class label must be
dropped, otherwise the task leaks its own answer.
"""
import argparse
import csv
import gzip
from pathlib import Path

import rdflib


def term_id(term):
    if isinstance(term, rdflib.Literal):
        return term.n3()
    return str(term)


def convert_split(src, dst):
    # pyRDF2Vec-style split files: header, entity column first, label column last
    with open(src, newline="") as fin, open(dst, "w") as fout:
        rows = list(csv.reader(fin, delimiter="\t"))
        for row in rows[1:]:
            if row:
                fout.write(f"{row[0]}\t{row[-1]}\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("rdf")
    ap.add_argument("out_dir")
    ap.add_argument("--format", default="xml")
    ap.add_argument("--drop", action="append", default=[], help="relation URI to remove")
    ap.add_argument("--train")
    ap.add_argument("--test")
    args = ap.parse_args()

    g = rdflib.Graph()
    g.parse(args.rdf, format=args.format)
    drop = {rdflib.URIRef(d) for d in args.drop}
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    # sorted so the output does not depend on rdflib's hash-set iteration order
    rows = sorted(
        (term_id(s), str(p), term_id(o)) for s, p, o in g if p not in drop
    )
    payload = "".join(f"{s}\t{p}\t{o}\n" for s, p, o in rows).encode("utf-8")
    with open(out / "triples.tsv.gz", "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", compresslevel=9, mtime=0) as f:
            f.write(payload)
    print(f"{len(rows)} triples written")

    if args.train:
        convert_split(args.train, out / "train.tsv")
    if args.test:
        convert_split(args.test, out / "test.tsv")


if __name__ == "__main__":
    main()
