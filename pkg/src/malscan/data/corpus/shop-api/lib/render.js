"use strict";

function escapeHtml(s) {
  return String(s).replace(/[&<>"']/g, (c) => ({
    "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;",
  }[c]));
}

function renderList(items) {
  return "<ul>" + items.map((i) => "<li>" + escapeHtml(i.name) + "</li>").join("") + "</ul>";
}

function renderSearch(req, res) {
  const q = req.query.q || "";
  res.send("<h1>Results for " + q + "</h1>" + renderList([]));
}

module.exports = { escapeHtml, renderList, renderSearch };
