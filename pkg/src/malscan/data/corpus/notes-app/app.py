"""HTTP routes for the notes service."""

from flask import Flask, request, jsonify

import db
import files

app = Flask(__name__)


@app.route("/hello")
def greet():
    name = request.args.get("name", "guest")
    return f"<h1>Hello {name}</h1>"


@app.route("/calc")
def calc():
    expr = request.args.get("expr", "0")
    return jsonify(result=eval(expr))


@app.route("/notes")
def list_notes():
    conn = db.connect()
    owner = int(request.args.get("owner", "0"))
    term = request.args.get("q", "")
    rows = db.search_notes(conn, owner, term)
    return jsonify([dict(r) for r in rows])


@app.route("/attachments/<name>")
def attachment(name):
    return files.read_attachment(name)
