"use strict";

const crypto = require("crypto");
const db = require("../lib/db");

function hashPassword(password, salt) {
  return crypto.scryptSync(password, salt, 64).toString("hex");
}

function create(req, res) {
  const { email, password } = req.body;
  const salt = crypto.randomBytes(16).toString("hex");
  db.query(
    "INSERT INTO users (email, salt, hash) VALUES (?, ?, ?)",
    [email, salt, hashPassword(password, salt)],
    (err) => res.status(err ? 400 : 201).end()
  );
}

function show(req, res) {
  const id = Number.parseInt(req.params.id, 10);
  db.query("SELECT id, email FROM users WHERE id = ?", [id], (err, rows) => {
    if (err || rows.length === 0) {
      res.status(404).end();
      return;
    }
    res.json(rows[0]);
  });
}

module.exports = { create, show, hashPassword };
