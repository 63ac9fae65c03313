"use strict";

const express = require("express");
const products = require("./routes/products");
const users = require("./routes/users");
const { renderSearch } = require("./lib/render");
const { sendUpload } = require("./lib/files");

const app = express();
app.use(express.json());

app.get("/products", products.list);
app.get("/products/search", renderSearch);
app.post("/users", users.create);
app.get("/users/:id", users.show);
app.get("/uploads/:name", sendUpload);

const port = Number(process.env.PORT || 3000);
app.listen(port, () => {
  console.log(`shop-api listening on ${port}`);
});
