"use strict";

const db = require("../lib/db");

function list(req, res) {
  const category = req.query.category || "all";
  const sql = "SELECT id, name, price FROM products WHERE category = '" + category + "' ORDER BY name";
  db.query(sql, (err, rows) => {
    if (err) {
      res.status(500).json({ error: "query failed" });
      return;
    }
    res.json(rows);
  });
}

function priceWithTax(price, rate) {
  return Math.round(price * (1 + rate) * 100) / 100;
}

module.exports = { list, priceWithTax };
