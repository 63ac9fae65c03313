"use strict";

const fs = require("fs");
const path = require("path");

const UPLOAD_DIR = path.resolve(__dirname, "..", "uploads");

function sendUpload(req, res) {
  const target = path.join(UPLOAD_DIR, req.params.name);
  fs.readFile(target, (err, data) => {
    if (err) {
      res.status(404).end();
      return;
    }
    res.type("application/octet-stream").send(data);
  });
}

function uploadExists(name) {
  const target = path.resolve(UPLOAD_DIR, name);
  return target.startsWith(UPLOAD_DIR + path.sep) && fs.existsSync(target);
}

module.exports = { sendUpload, uploadExists };
