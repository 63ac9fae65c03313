package main

import (
	"fmt"
	"strings"
)

type Server struct {
	name string
}

func (s *Server) Handle(path string) string {
	return strings.ToUpper(path) + "{"
}

func main() {
	s := &Server{name: "x"}
	fmt.Println(s.Handle(`raw { string`))
}
